//! End-to-end recognition pipeline: template extraction, per-view mask
//! tuning on the tuning subjects, and view-routed evaluation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::classifier::{ClassifierModel, Decision, DEFAULT_VARIANCE_TARGET};
use crate::dataset::{compute_ccr, role_of, CcrTable, GaitRecord, Role, SequenceKey, SplitPlan};
use crate::error::{GtsError, Result};
use crate::ga::{evolve_hypothesis, sequential_refine, Evolution, FitnessReport, GaConfig, HypothesisObjective};
use crate::imagecore::{
    binarize, detect_gait_cycle, normalize, read_gray_png, BinaryGrid, GrayImage, SilhouetteSequence,
    DEFAULT_THRESHOLD,
};
use crate::segmentation::{build_mask, GtsHypothesis, SplitBounds};
use crate::templates::{Covariate, GaitTemplate, TemplateKind};
use crate::viewest::{extract_view_features, ViewAngle, ViewEstimator, ViewFeatures};

/// Template and view features of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSequence {
    pub template: GaitTemplate,
    pub features: ViewFeatures,
}

impl ExtractedSequence {
    pub fn key(&self) -> SequenceKey {
        SequenceKey {
            subject: self.template.subject,
            covariate: self.template.covariate,
            sequence: self.template.sequence,
            view: self.template.view,
        }
    }
}

/// Scene frames to template. Frames that are empty after binarization or
/// cannot be normalized are dropped. When no gait cycle is found the whole
/// sequence is collated.
pub fn extract_frames(frames: &[GrayImage], key: SequenceKey, kind: TemplateKind) -> Result<ExtractedSequence> {
    let mut binary: Vec<BinaryGrid> = Vec::with_capacity(frames.len());
    let mut silhouettes = Vec::with_capacity(frames.len());
    for frame in frames {
        let Ok(b) = binarize(frame, DEFAULT_THRESHOLD) else { continue };
        if let Ok(s) = normalize(&b) {
            binary.push(b);
            silhouettes.push(s);
        }
    }
    if silhouettes.len() < 2 {
        return Err(GtsError::TooFewFrames {
            needed: 2,
            got: silhouettes.len(),
        });
    }
    let features = extract_view_features(&binary)?;
    let (start, end) = detect_gait_cycle(&silhouettes).unwrap_or((0, silhouettes.len()));
    let seq = SilhouetteSequence::new(silhouettes[start..end].to_vec())?;
    Ok(ExtractedSequence {
        template: GaitTemplate::from_sequence(kind, &seq, key.view, key.covariate, key.subject, key.sequence),
        features,
    })
}

/// View features of a sequence of scene frames, skipping empty frames.
pub fn sequence_view_features(frames: &[GrayImage]) -> Result<ViewFeatures> {
    let binary: Vec<BinaryGrid> = frames
        .iter()
        .filter_map(|f| binarize(f, DEFAULT_THRESHOLD).ok())
        .filter(|b| normalize(b).is_ok())
        .collect();
    extract_view_features(&binary)
}

pub fn extract_record(record: &GaitRecord, kind: TemplateKind) -> Result<ExtractedSequence> {
    let frames = record
        .frames
        .iter()
        .map(|p| read_gray_png(p))
        .collect::<Result<Vec<_>>>()?;
    extract_frames(&frames, record.key(), kind)
}

/// Extracts every record; failures are returned per sequence instead of
/// aborting the batch.
pub fn extract_all(
    records: &[GaitRecord],
    kind: TemplateKind,
) -> (Vec<ExtractedSequence>, Vec<(SequenceKey, GtsError)>) {
    let run = |r: &GaitRecord| (r.key(), extract_record(r, kind));
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        records.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = records.iter().map(run).collect();

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (key, r) in results {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => failed.push((key, e)),
        }
    }
    ok.sort_by_key(ExtractedSequence::key);
    (ok, failed)
}

pub const FEATURES_FILE: &str = "features.csv";
const FEATURES_HEADER: &str = "subject,covariate,seq,angle,kind,m_p,m_q,coronal,area_ratio,digest";

/// FNV-1a, used to fingerprint stored templates.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Writes `<stem>.tpl` per sequence plus `features.csv` with the view
/// features and a digest of each template file. Output depends only on the
/// inputs.
pub fn write_store(dir: &Path, samples: &[ExtractedSequence]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GtsError::io(dir, e))?;
    let mut sorted: Vec<&ExtractedSequence> = samples.iter().collect();
    sorted.sort_by_key(|s| s.key());
    let mut index = String::from(FEATURES_HEADER);
    index.push('\n');
    for s in sorted {
        let key = s.key();
        let mut bytes = Vec::new();
        s.template
            .write_record(&mut bytes)
            .expect("writing to a Vec cannot fail");
        let path = dir.join(format!("{}.tpl", key.stem()));
        fs::write(&path, &bytes).map_err(|e| GtsError::io(&path, e))?;
        let f = &s.features;
        let _ = writeln!(
            index,
            "{:03},{},{:02},{:03},{},{:?},{:?},{},{:?},{:016x}",
            key.subject,
            key.covariate.code(),
            key.sequence,
            key.view.degrees(),
            s.template.kind,
            f.m_p,
            f.m_q,
            u8::from(f.coronal),
            f.area_ratio,
            fnv1a(&bytes)
        );
    }
    let path = dir.join(FEATURES_FILE);
    fs::write(&path, index).map_err(|e| GtsError::io(&path, e))
}

pub fn read_store(dir: &Path) -> Result<Vec<ExtractedSequence>> {
    let path = dir.join(FEATURES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| GtsError::io(&path, e))?;
    let mut out = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let bad = || GtsError::Format(format!("{}: {line:?}", path.display()));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad());
        }
        let key = SequenceKey::parse_stem(&f[..4].join("-")).ok_or_else(bad)?;
        let tpl_path = dir.join(format!("{}.tpl", key.stem()));
        let bytes = fs::read(&tpl_path).map_err(|e| GtsError::io(&tpl_path, e))?;
        if format!("{:016x}", fnv1a(&bytes)) != f[9] {
            return Err(GtsError::Format(format!("{} does not match its digest", tpl_path.display())));
        }
        let template = GaitTemplate::parse_record(&bytes)?;
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        out.push(ExtractedSequence {
            template,
            features: ViewFeatures {
                m_p: num(5)?,
                m_q: num(6)?,
                coronal: f[7] == "1",
                area_ratio: num(8)?,
            },
        });
    }
    if out.is_empty() {
        return Err(GtsError::EmptyCorpus(dir.to_path_buf()));
    }
    Ok(out)
}

/// Stacks the masked pixels of each template as a row.
fn feature_matrix(templates: &[&GaitTemplate], indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(templates.len(), indices.len(), |r, c| {
        templates[r].pixels.as_slice()[indices[c]]
    })
}

fn masked(t: &GaitTemplate, indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| t.pixels.as_slice()[i]).collect()
}

/// Classifier settings shared by tuning and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub variance_target: f64,
    pub decision: Decision,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            variance_target: DEFAULT_VARIANCE_TARGET,
            decision: Decision::Bayes,
        }
    }
}

/// GTS fitness on the tuning subjects of one view: train on Set-A1, score
/// CCR on Set-A2, Set-B and Set-C. Scores are cached by canonical hypothesis.
pub struct GtsObjective<'a> {
    gallery: Vec<&'a GaitTemplate>,
    labels: Vec<u32>,
    probes: [Vec<&'a GaitTemplate>; 3],
    classifier: ClassifierConfig,
    cache: Mutex<HashMap<GtsHypothesis, FitnessReport>>,
}

impl<'a> GtsObjective<'a> {
    /// `templates` must all share one view and come from tuning subjects.
    pub fn new(templates: &[&'a GaitTemplate], classifier: ClassifierConfig) -> Result<Self> {
        let mut gallery = Vec::new();
        let mut probes: [Vec<&GaitTemplate>; 3] = Default::default();
        for &t in templates {
            match role_of(t.covariate, t.sequence) {
                Role::Gallery => gallery.push(t),
                Role::Probe(c) => probes[c.index()].push(t),
            }
        }
        let labels: Vec<u32> = gallery.iter().map(|t| t.subject).collect();
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(GtsError::InsufficientTuningData("need at least 2 gallery subjects".into()));
        }
        if let Some(c) = Covariate::ALL.iter().find(|c| probes[c.index()].is_empty()) {
            return Err(GtsError::InsufficientTuningData(format!("no {} probes", c.code())));
        }
        Ok(GtsObjective {
            gallery,
            labels,
            probes,
            classifier,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn score(&self, h: &GtsHypothesis) -> Result<FitnessReport> {
        if h.includes_nothing() {
            return Ok(FitnessReport::zero());
        }
        let indices = build_mask(h).included_indices();
        let x = feature_matrix(&self.gallery, &indices);
        let model = match ClassifierModel::fit(
            &x,
            &self.labels,
            self.classifier.variance_target,
            self.classifier.decision,
        ) {
            Ok(m) => m,
            Err(GtsError::DegenerateData(_) | GtsError::SingularScatter) => return Ok(FitnessReport::zero()),
            Err(e) => return Err(e),
        };
        let mut ccr = [0.0; 3];
        for c in Covariate::ALL {
            let probes = &self.probes[c.index()];
            let preds = probes
                .iter()
                .map(|t| model.predict(&masked(t, &indices)))
                .collect::<Result<Vec<_>>>()?;
            let truths: Vec<u32> = probes.iter().map(|t| t.subject).collect();
            ccr[c.index()] = compute_ccr(&preds, &truths)?;
        }
        Ok(FitnessReport::from_ccrs(ccr[0], ccr[1], ccr[2]))
    }
}

impl HypothesisObjective for GtsObjective<'_> {
    fn evaluate_hypothesis(&self, h: &GtsHypothesis) -> Result<FitnessReport> {
        let key = h.canonical();
        if let Some(r) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*r);
        }
        let report = self.score(&key)?;
        self.cache.lock().expect("cache lock").insert(key, report);
        Ok(report)
    }
}

/// Per-view GA seed derived from the run seed.
pub fn view_seed(seed: u64, view: ViewAngle) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (view.degrees() as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct TuneConfig {
    pub ga: GaConfig,
    pub bounds: SplitBounds,
    pub classifier: ClassifierConfig,
}


#[derive(Debug, Clone, PartialEq)]
pub struct ViewTuning {
    pub view: ViewAngle,
    /// Best hypothesis after GA and sequential refinement.
    pub hypothesis: GtsHypothesis,
    pub report: FitnessReport,
    pub evolution: Evolution,
}

/// Runs GA and refinement for one view. `config.ga.seed` is used as given.
pub fn tune_view(templates: &[&GaitTemplate], view: ViewAngle, config: &TuneConfig) -> Result<ViewTuning> {
    let objective = GtsObjective::new(templates, config.classifier)?;
    let (h, evolution) = evolve_hypothesis(&config.ga, &config.bounds, &objective)?;
    let (hypothesis, report) = sequential_refine(&h, &config.bounds, &objective)?;
    Ok(ViewTuning {
        view,
        hypothesis,
        report,
        evolution,
    })
}

/// Templates of the tuning subjects, grouped by view.
pub fn tuning_templates<'a>(
    samples: &'a [ExtractedSequence],
    plan: &SplitPlan,
) -> BTreeMap<ViewAngle, Vec<&'a GaitTemplate>> {
    let mut by_view: BTreeMap<ViewAngle, Vec<&GaitTemplate>> = BTreeMap::new();
    for s in samples.iter().filter(|s| plan.is_tuning(s.template.subject)) {
        by_view.entry(s.template.view).or_default().push(&s.template);
    }
    by_view
}

/// Tunes every view present among the tuning subjects, each with its own
/// seed derived from `config.ga.seed`.
pub fn tune_all(samples: &[ExtractedSequence], plan: &SplitPlan, config: &TuneConfig) -> Result<Vec<ViewTuning>> {
    let by_view = tuning_templates(samples, plan);
    let run = |(view, templates): (&ViewAngle, &Vec<&GaitTemplate>)| {
        let mut c = config.clone();
        c.ga.seed = view_seed(config.ga.seed, *view);
        tune_view(templates, *view, &c)
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        by_view.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = by_view.iter().map(run).collect();
    out
}

/// View estimator trained on the tuning subjects' sequences.
pub fn fit_view_estimator(samples: &[ExtractedSequence], plan: &SplitPlan) -> Result<ViewEstimator> {
    let pairs: Vec<(ViewFeatures, ViewAngle)> = samples
        .iter()
        .filter(|s| plan.is_tuning(s.template.subject))
        .map(|s| (s.features, s.template.view))
        .collect();
    ViewEstimator::fit(&pairs)
}

/// `# seed=<seed>` followed by one `view,s_h,s_m,s_f,w_h,w_l,w_r,w_f` line
/// per view.
pub fn format_hypotheses(seed: u64, hypotheses: &BTreeMap<ViewAngle, GtsHypothesis>) -> String {
    let mut out = format!("# seed={seed}\n");
    for (view, h) in hypotheses {
        out.push_str(&h.to_record(*view));
        out.push('\n');
    }
    out
}

pub fn parse_hypotheses(text: &str) -> Result<BTreeMap<ViewAngle, GtsHypothesis>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(GtsHypothesis::parse_record)
        .collect()
}

/// Mask and classifier for one view, trained on the evaluation gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewModel {
    pub hypothesis: GtsHypothesis,
    pub indices: Vec<usize>,
    pub model: ClassifierModel,
}

impl ViewModel {
    pub fn predict(&self, t: &GaitTemplate) -> Result<u32> {
        self.model.predict(&masked(t, &self.indices))
    }
}

/// Fits one model per hypothesis view on Set-A1 of the evaluation subjects.
pub fn fit_view_models(
    samples: &[ExtractedSequence],
    plan: &SplitPlan,
    hypotheses: &BTreeMap<ViewAngle, GtsHypothesis>,
    classifier: ClassifierConfig,
) -> Result<BTreeMap<ViewAngle, ViewModel>> {
    let fit = |(view, h): (&ViewAngle, &GtsHypothesis)| -> Result<(ViewAngle, ViewModel)> {
        let gallery: Vec<&GaitTemplate> = samples
            .iter()
            .map(|s| &s.template)
            .filter(|t| {
                t.view == *view && plan.is_evaluation(t.subject) && role_of(t.covariate, t.sequence) == Role::Gallery
            })
            .collect();
        if gallery.is_empty() {
            return Err(GtsError::EmptyGallery);
        }
        let indices = build_mask(h).included_indices();
        let labels: Vec<u32> = gallery.iter().map(|t| t.subject).collect();
        let model = ClassifierModel::fit(
            &feature_matrix(&gallery, &indices),
            &labels,
            classifier.variance_target,
            classifier.decision,
        )?;
        Ok((
            *view,
            ViewModel {
                hypothesis: *h,
                indices,
                model,
            },
        ))
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        hypotheses.par_iter().map(fit).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = hypotheses.iter().map(fit).collect();
    out
}

/// How probes find their view model.
#[derive(Debug, Clone, Copy)]
pub enum Routing<'a> {
    /// Ground-truth view.
    Known,
    /// View predicted from the sequence's features.
    Estimated(&'a ViewEstimator),
}

/// Classifies every evaluation probe with the model of its (known or
/// estimated) view and tabulates CCR by true view and covariate. A misrouted
/// probe keeps the prediction of the wrong-view model.
pub fn evaluate_probes(
    samples: &[ExtractedSequence],
    plan: &SplitPlan,
    models: &BTreeMap<ViewAngle, ViewModel>,
    routing: Routing,
) -> Result<CcrTable> {
    let views: Vec<ViewAngle> = models.keys().copied().collect();
    let mut table = CcrTable::new(&views);
    for s in samples.iter().filter(|s| plan.is_evaluation(s.template.subject)) {
        let Role::Probe(covariate) = role_of(s.template.covariate, s.template.sequence) else {
            continue;
        };
        let route = match routing {
            Routing::Known => s.template.view,
            Routing::Estimated(est) => est.estimate(&s.features),
        };
        let model = models.get(&route).ok_or(GtsError::MissingAngle(route.degrees()))?;
        let pred = model.predict(&s.template)?;
        table.record(s.template.view, covariate, pred == s.template.subject);
    }
    Ok(table)
}

/// Fits the per-view models and evaluates with view estimation.
pub fn evaluate_view_invariant(
    samples: &[ExtractedSequence],
    plan: &SplitPlan,
    hypotheses: &BTreeMap<ViewAngle, GtsHypothesis>,
    estimator: &ViewEstimator,
    classifier: ClassifierConfig,
) -> Result<CcrTable> {
    let models = fit_view_models(samples, plan, hypotheses, classifier)?;
    evaluate_probes(samples, plan, &models, Routing::Estimated(estimator))
}

/// Same hypothesis for every view.
pub fn uniform_hypotheses(views: &[ViewAngle], h: GtsHypothesis) -> BTreeMap<ViewAngle, GtsHypothesis> {
    views.iter().map(|&v| (v, h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Grid;
    use crate::synth::{generate, WalkerSpec};

    fn key(subject: u32, covariate: Covariate, sequence: u16, view: u16) -> SequenceKey {
        SequenceKey {
            subject,
            covariate,
            sequence,
            view: ViewAngle::new(view).unwrap(),
        }
    }

    #[test]
    fn extract_synthetic_sequence() {
        let spec = WalkerSpec::new(1, 4, Covariate::Normal, 2, ViewAngle::new(90).unwrap());
        let (frames, _) = generate(&spec).unwrap();
        let s = extract_frames(&frames, key(4, Covariate::Normal, 2, 90), TemplateKind::Gei).unwrap();
        assert_eq!(s.template.pixels.dims(), (240, 240));
        assert_eq!((s.template.subject, s.template.sequence), (4, 2));
        assert!(!s.features.coronal);
        assert!(s.template.pixels.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn extraction_drops_empty_frames() {
        let spec = WalkerSpec::new(1, 4, Covariate::Bag, 1, ViewAngle::new(126).unwrap());
        let (mut frames, _) = generate(&spec).unwrap();
        let with_blank = {
            let mut f = frames.clone();
            f.insert(5, Grid::new(frames[0].width(), frames[0].height()));
            f
        };
        let k = key(4, Covariate::Bag, 1, 126);
        let a = extract_frames(&with_blank, k, TemplateKind::Aei).unwrap();
        let b = extract_frames(&frames, k, TemplateKind::Aei).unwrap();
        assert_eq!(a, b);
        frames.truncate(1);
        assert!(matches!(
            extract_frames(&frames, k, TemplateKind::Gei),
            Err(GtsError::TooFewFrames { .. })
        ));
    }

    fn toy_templates() -> Vec<GaitTemplate> {
        // Each subject owns a bright block on the head rows; coats paint
        // the midsection with noise that is not subject-specific.
        let mut out = Vec::new();
        for subject in 1..=3u32 {
            for (cov, count) in [(Covariate::Normal, 6u16), (Covariate::Bag, 2), (Covariate::Coat, 2)] {
                for sequence in 1..=count {
                    let pixels = Grid::from_fn(240, 240, |r, c| {
                        let id = if r < 40 && c / 80 == subject as usize - 1 { 1.0 } else { 0.0 };
                        let wobble = ((r * 7 + c * 13 + sequence as usize * 31) % 17) as f64 / 170.0;
                        let mid = if (90..150).contains(&r) && cov != Covariate::Normal {
                            ((r + c * 3 + subject as usize * 5 + sequence as usize * 11) % 5) as f64 / 5.0
                        } else {
                            0.0
                        };
                        id + wobble + mid
                    });
                    out.push(GaitTemplate {
                        kind: TemplateKind::Gei,
                        view: ViewAngle::new(90).unwrap(),
                        covariate: cov,
                        subject,
                        sequence,
                        pixels,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn objective_scores_and_caches() {
        let templates = toy_templates();
        let refs: Vec<&GaitTemplate> = templates.iter().collect();
        let obj = GtsObjective::new(&refs, ClassifierConfig::default()).unwrap();
        let head_only = GtsHypothesis::new(60, 120, 180, [true, false, false, false]).unwrap();
        let r = obj.evaluate_hypothesis(&head_only).unwrap();
        assert_eq!(r.fitness, 1.0);
        let nothing = GtsHypothesis::new(60, 120, 180, [false; 4]).unwrap();
        assert_eq!(obj.evaluate_hypothesis(&nothing).unwrap(), FitnessReport::zero());
        // Same mask through a different split that does not matter.
        let alias = GtsHypothesis::new(60, 7, 180, [true, false, false, false]).unwrap();
        assert_eq!(obj.evaluate_hypothesis(&alias).unwrap(), r);
        assert_eq!(obj.cached(), 2);
    }

    #[test]
    fn objective_needs_probes() {
        let templates: Vec<GaitTemplate> =
            toy_templates().into_iter().filter(|t| t.covariate != Covariate::Coat).collect();
        let refs: Vec<&GaitTemplate> = templates.iter().collect();
        assert!(matches!(
            GtsObjective::new(&refs, ClassifierConfig::default()),
            Err(GtsError::InsufficientTuningData(_))
        ));
    }

    #[test]
    fn hypotheses_file_roundtrip() {
        let mut m = BTreeMap::new();
        m.insert(ViewAngle::new(0).unwrap(), GtsHypothesis::whole());
        m.insert(
            ViewAngle::new(90).unwrap(),
            GtsHypothesis::new(30, 100, 200, [true, false, false, true]).unwrap(),
        );
        let text = format_hypotheses(17, &m);
        assert!(text.starts_with("# seed=17\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_hypotheses(&text).unwrap(), m);
    }

    #[test]
    fn memorization_gives_full_ccr() {
        // Every probe is a copy of one of its subject's gallery templates.
        let view = ViewAngle::new(90).unwrap();
        let mut samples = Vec::new();
        for subject in 1..=4u32 {
            let gallery: Vec<ExtractedSequence> = (1..=4u16)
                .map(|sequence| {
                    let spec = WalkerSpec::new(3, subject, Covariate::Normal, sequence, view);
                    let (frames, _) = generate(&spec).unwrap();
                    extract_frames(&frames, key(subject, Covariate::Normal, sequence, 90), TemplateKind::Gei).unwrap()
                })
                .collect();
            for (i, (cov, sequence)) in [
                (Covariate::Normal, 5u16),
                (Covariate::Normal, 6),
                (Covariate::Bag, 1),
                (Covariate::Bag, 2),
                (Covariate::Coat, 1),
                (Covariate::Coat, 2),
            ]
            .into_iter()
            .enumerate()
            {
                let mut probe = gallery[i % 4].clone();
                probe.template.covariate = cov;
                probe.template.sequence = sequence;
                samples.push(probe);
            }
            samples.extend(gallery);
        }
        let plan = SplitPlan {
            seed: 0,
            tuning: vec![],
            evaluation: vec![1, 2, 3, 4],
        };
        let hyps = uniform_hypotheses(&[view], GtsHypothesis::whole());
        let models = fit_view_models(&samples, &plan, &hyps, ClassifierConfig::default()).unwrap();
        let table = evaluate_probes(&samples, &plan, &models, Routing::Known).unwrap();
        assert_eq!(table.overall_mean(), 1.0);
        assert_eq!(table.row(view).unwrap().cells.iter().map(|c| c.total).sum::<usize>(), 24);
    }

    #[test]
    fn store_roundtrip_is_byte_stable() {
        let mut samples = Vec::new();
        for (i, view) in [90u16, 0].into_iter().enumerate() {
            let spec = WalkerSpec::new(2, 1, Covariate::Coat, 1, ViewAngle::new(view).unwrap());
            let (frames, _) = generate(&spec).unwrap();
            samples.push(extract_frames(&frames, key(1, Covariate::Coat, 1 + i as u16, view), TemplateKind::Geni).unwrap());
        }
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_store(a.path(), &samples).unwrap();
        samples.reverse();
        write_store(b.path(), &samples).unwrap();
        for name in ["features.csv", "001-cl-01-090.tpl", "001-cl-02-000.tpl"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        let back = read_store(a.path()).unwrap();
        assert_eq!(back.len(), 2);
        for s in &back {
            let orig = samples.iter().find(|o| o.key() == s.key()).unwrap();
            assert_eq!(s.features, orig.features);
            for (x, y) in s.template.pixels.as_slice().iter().zip(orig.template.pixels.as_slice()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        // Tampering is detected.
        fs::write(a.path().join("001-cl-01-090.tpl"), b"GTST").unwrap();
        assert!(read_store(a.path()).is_err());
    }
}
