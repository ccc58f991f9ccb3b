//! Corpus ingestion, tuning/evaluation splits and CCR tables.
//!
//! The corpus follows the CASIA-B layout
//! `SSS/cc-NN/AAA/SSS-cc-NN-AAA-FFF.png`: subject, condition code
//! (`nm`, `bg`, `cl`), sequence number, view angle and frame number.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GtsError, Result};
use crate::templates::Covariate;
use crate::viewest::ViewAngle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SequenceKey {
    pub subject: u32,
    pub covariate: Covariate,
    pub sequence: u16,
    pub view: ViewAngle,
}

impl SequenceKey {
    /// `SSS-cc-NN-AAA`
    pub fn stem(&self) -> String {
        format!(
            "{:03}-{}-{:02}-{:03}",
            self.subject,
            self.covariate.code(),
            self.sequence,
            self.view.degrees()
        )
    }

    pub fn parse_stem(stem: &str) -> Option<Self> {
        let mut it = stem.split('-');
        let subject = it.next()?;
        let covariate = Covariate::from_code(it.next()?)?;
        let sequence = it.next()?;
        let view = it.next()?;
        if it.next().is_some() || subject.len() != 3 || sequence.len() != 2 || view.len() != 3 {
            return None;
        }
        Some(SequenceKey {
            subject: subject.parse().ok()?,
            covariate,
            sequence: sequence.parse().ok()?,
            view: ViewAngle::new(view.parse().ok()?).ok()?,
        })
    }
}

/// Parses `SSS-cc-NN-AAA-FFF.png` into the sequence key and frame number.
pub fn parse_frame_name(name: &str) -> Option<(SequenceKey, u32)> {
    let stem = name.strip_suffix(".png")?;
    let (seq, frame) = stem.rsplit_once('-')?;
    if frame.len() < 3 || !frame.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((SequenceKey::parse_stem(seq)?, frame.parse().ok()?))
}

/// One silhouette sequence on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaitRecord {
    pub subject: u32,
    pub covariate: Covariate,
    pub sequence: u16,
    pub view: ViewAngle,
    /// Frame files in frame order.
    pub frames: Vec<PathBuf>,
}

impl GaitRecord {
    pub fn key(&self) -> SequenceKey {
        SequenceKey {
            subject: self.subject,
            covariate: self.covariate,
            sequence: self.sequence,
            view: self.view,
        }
    }
}

/// Result of scanning a corpus: the records plus one error per file whose
/// name or location does not fit the naming scheme.
#[derive(Debug, Default)]
pub struct CorpusScan {
    pub records: Vec<GaitRecord>,
    pub malformed: Vec<GtsError>,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| GtsError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| GtsError::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn collect_pngs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for path in read_dir_sorted(dir)? {
        if path.is_dir() {
            collect_pngs(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Scans `root` for frames. Files with malformed names, or stored in a
/// directory that disagrees with their name, are reported and skipped.
pub fn load_corpus(root: &Path) -> Result<CorpusScan> {
    let mut files = Vec::new();
    collect_pngs(root, &mut files)?;

    let mut grouped: BTreeMap<SequenceKey, Vec<(u32, PathBuf)>> = BTreeMap::new();
    let mut malformed = Vec::new();
    for path in files {
        let parsed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(parse_frame_name)
            .filter(|(key, _)| {
                let expected = Path::new(&format!("{:03}", key.subject))
                    .join(format!("{}-{:02}", key.covariate.code(), key.sequence))
                    .join(format!("{:03}", key.view.degrees()));
                path.parent()
                    .and_then(|p| p.strip_prefix(root).ok())
                    .is_some_and(|rel| rel == expected)
            });
        match parsed {
            Some((key, frame)) => grouped.entry(key).or_default().push((frame, path)),
            None => malformed.push(GtsError::MalformedName(path)),
        }
    }
    if grouped.is_empty() {
        return Err(GtsError::EmptyCorpus(root.to_path_buf()));
    }
    let records = grouped
        .into_iter()
        .map(|(key, mut frames)| {
            frames.sort();
            GaitRecord {
                subject: key.subject,
                covariate: key.covariate,
                sequence: key.sequence,
                view: key.view,
                frames: frames.into_iter().map(|(_, p)| p).collect(),
            }
        })
        .collect();
    Ok(CorpusScan { records, malformed })
}

pub const DEFAULT_TUNING_SUBJECTS: usize = 24;
/// Normal sequences `1..=GALLERY_SEQUENCES` form the gallery (Set-A1).
pub const GALLERY_SEQUENCES: u16 = 4;

/// How a sequence is used during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Gallery,
    /// Probe in the set of the given covariate (Set-A2, Set-B, Set-C).
    Probe(Covariate),
}

pub fn role_of(covariate: Covariate, sequence: u16) -> Role {
    match covariate {
        Covariate::Normal if sequence <= GALLERY_SEQUENCES => Role::Gallery,
        c => Role::Probe(c),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub tuning: Vec<u32>,
    pub evaluation: Vec<u32>,
}

impl SplitPlan {
    pub fn is_tuning(&self, subject: u32) -> bool {
        self.tuning.binary_search(&subject).is_ok()
    }

    pub fn is_evaluation(&self, subject: u32) -> bool {
        self.evaluation.binary_search(&subject).is_ok()
    }
}

pub fn subjects_of(records: &[GaitRecord]) -> Vec<u32> {
    let mut s: Vec<u32> = records.iter().map(|r| r.subject).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Samples the default 24 tuning subjects.
pub fn make_split(subjects: &[u32], seed: u64) -> Result<SplitPlan> {
    make_split_sized(subjects, seed, DEFAULT_TUNING_SUBJECTS)
}

/// Samples `tuning` subjects uniformly without replacement; the rest are
/// evaluation subjects. At least one evaluation subject must remain.
pub fn make_split_sized(subjects: &[u32], seed: u64, tuning: usize) -> Result<SplitPlan> {
    let mut all = subjects.to_vec();
    all.sort_unstable();
    all.dedup();
    if tuning == 0 || all.len() <= tuning {
        return Err(GtsError::TooFewSubjects {
            needed: tuning.max(1) + 1,
            got: all.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<u32> = index::sample(&mut rng, all.len(), tuning)
        .into_iter()
        .map(|i| all[i])
        .collect();
    picked.sort_unstable();
    let evaluation = all.iter().copied().filter(|s| picked.binary_search(s).is_err()).collect();
    Ok(SplitPlan {
        seed,
        tuning: picked,
        evaluation,
    })
}

pub fn compute_ccr(predictions: &[u32], truths: &[u32]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(GtsError::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(GtsError::EmptyInput);
    }
    let correct = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Correct/total counts of one table cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CcrCell {
    pub correct: usize,
    pub total: usize,
}

impl CcrCell {
    pub fn record(&mut self, hit: bool) {
        self.total += 1;
        self.correct += usize::from(hit);
    }

    /// NaN when the cell is empty.
    pub fn ccr(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn mean_of(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcrRow {
    pub view: ViewAngle,
    /// Indexed by `Covariate::index`.
    pub cells: [CcrCell; 3],
}

impl CcrRow {
    pub fn ccr(&self, c: Covariate) -> f64 {
        self.cells[c.index()].ccr()
    }

    pub fn mean(&self) -> f64 {
        mean_of(self.cells.iter().map(CcrCell::ccr))
    }
}

/// Per-angle, per-covariate CCR. Means skip empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrTable {
    pub rows: Vec<CcrRow>,
}

impl CcrTable {
    pub fn new(views: &[ViewAngle]) -> Self {
        CcrTable {
            rows: views
                .iter()
                .map(|&view| CcrRow {
                    view,
                    cells: [CcrCell::default(); 3],
                })
                .collect(),
        }
    }

    pub fn record(&mut self, view: ViewAngle, covariate: Covariate, hit: bool) {
        let row = match self.rows.iter().position(|r| r.view == view) {
            Some(i) => i,
            None => {
                self.rows.push(CcrRow {
                    view,
                    cells: [CcrCell::default(); 3],
                });
                self.rows.sort_by_key(|r| r.view);
                self.rows.iter().position(|r| r.view == view).unwrap()
            }
        };
        self.rows[row].cells[covariate.index()].record(hit);
    }

    pub fn row(&self, view: ViewAngle) -> Option<&CcrRow> {
        self.rows.iter().find(|r| r.view == view)
    }

    pub fn covariate_mean(&self, c: Covariate) -> f64 {
        mean_of(self.rows.iter().map(|r| r.ccr(c)))
    }

    /// Mean over the covariate means.
    pub fn overall_mean(&self) -> f64 {
        mean_of(Covariate::ALL.iter().map(|&c| self.covariate_mean(c)))
    }

    pub const CSV_HEADER: &'static str = "angle,normal,bag,coat,mean";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:03},{:.6},{:.6},{:.6},{:.6}",
                r.view.degrees(),
                r.ccr(Covariate::Normal),
                r.ccr(Covariate::Bag),
                r.ccr(Covariate::Coat),
                r.mean()
            );
        }
        let _ = writeln!(
            out,
            "mean,{:.6},{:.6},{:.6},{:.6}",
            self.covariate_mean(Covariate::Normal),
            self.covariate_mean(Covariate::Bag),
            self.covariate_mean(Covariate::Coat),
            self.overall_mean()
        );
        out
    }

    /// Percentages in aligned columns.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6} {:>8} {:>8} {:>8} {:>8}\n", "angle", "normal", "bag", "coat", "mean");
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>8} {:>8} {:>8} {:>8}",
                r.view.degrees(),
                pct(r.ccr(Covariate::Normal)),
                pct(r.ccr(Covariate::Bag)),
                pct(r.ccr(Covariate::Coat)),
                pct(r.mean())
            );
        }
        let _ = writeln!(
            out,
            "{:>6} {:>8} {:>8} {:>8} {:>8}",
            "mean",
            pct(self.covariate_mean(Covariate::Normal)),
            pct(self.covariate_mean(Covariate::Bag)),
            pct(self.covariate_mean(Covariate::Coat)),
            pct(self.overall_mean())
        );
        out
    }
}
