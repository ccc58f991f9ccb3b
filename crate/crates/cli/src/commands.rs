use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gts_core::dataset::{load_corpus, make_split_sized, CcrTable, SplitPlan};
use gts_core::imagecore::read_gray_png;
use gts_core::pipeline::{
    evaluate_view_invariant, extract_all, fit_view_estimator, format_hypotheses, parse_hypotheses, read_store,
    sequence_view_features, tune_all, uniform_hypotheses, write_store, ExtractedSequence, TuneConfig,
};
use gts_core::segmentation::{build_mask, mask_area_fraction, GtsHypothesis};
use gts_core::synth::{write_corpus, CorpusSpec};
use gts_core::viewest::{ViewAngle, ViewEstimator};
use gts_core::{GtsError, Result};

use crate::config::RunConfig;

pub const EXTRACT_LOG: &str = "extract.log";
pub const HYPOTHESES_FILE: &str = "hypotheses.txt";
pub const EVOLUTION_LOG: &str = "evolution.log";
pub const ESTIMATOR_FILE: &str = "view_estimator.bin";
pub const SPLIT_FILE: &str = "split.txt";
pub const CCR_TABLE: &str = "ccr_table.csv";
pub const CCR_TABLE_WHOLE: &str = "ccr_table_whole.csv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| GtsError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| GtsError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| GtsError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

pub fn synth(cfg: &RunConfig, subjects: u32) -> Result<()> {
    let spec = CorpusSpec::new(subjects, cfg.seed);
    let entries = write_corpus(&spec.walkers(), &cfg.out)?;
    println!(
        "wrote {} sequences of {subjects} subjects to {} (seed {})",
        entries.len(),
        cfg.out.display(),
        cfg.seed
    );
    Ok(())
}

pub fn extract(cfg: &RunConfig) -> Result<()> {
    let scan = load_corpus(cfg.corpus()?)?;
    let (samples, failed) = extract_all(&scan.records, cfg.template);
    let mut log = String::new();
    for e in &scan.malformed {
        let _ = writeln!(log, "skipped: {e}");
    }
    for (key, e) in &failed {
        let _ = writeln!(log, "{}: {e}", key.stem());
    }
    write(&cfg.out.join(EXTRACT_LOG), &log)?;
    if samples.is_empty() {
        return Err(GtsError::InsufficientTuningData(format!(
            "no sequence of {} could be extracted",
            cfg.corpus()?.display()
        )));
    }
    write_store(&cfg.templates_dir(), &samples)?;
    println!(
        "extracted {} {} templates from {} sequences; {} failed, {} files skipped",
        samples.len(),
        cfg.template,
        scan.records.len(),
        failed.len(),
        scan.malformed.len()
    );
    Ok(())
}

/// Store samples of the configured template kind.
fn load_samples(cfg: &RunConfig) -> Result<Vec<ExtractedSequence>> {
    let samples: Vec<ExtractedSequence> = read_store(&cfg.templates_dir())?
        .into_iter()
        .filter(|s| s.template.kind == cfg.template)
        .collect();
    if samples.is_empty() {
        return Err(GtsError::EmptyCorpus(cfg.templates_dir()));
    }
    Ok(samples)
}

fn split(cfg: &RunConfig, samples: &[ExtractedSequence]) -> Result<SplitPlan> {
    let subjects: Vec<u32> = samples.iter().map(|s| s.template.subject).collect();
    make_split_sized(&subjects, cfg.seed, cfg.tuning_subjects)
}

pub fn tune(cfg: &RunConfig) -> Result<()> {
    let samples = load_samples(cfg)?;
    let plan = split(cfg, &samples)?;
    write(
        &cfg.out.join(SPLIT_FILE),
        format!(
            "# seed={}\ntuning={}\nevaluation={}\n",
            plan.seed,
            join_ids(&plan.tuning),
            join_ids(&plan.evaluation)
        ),
    )?;
    let estimator = fit_view_estimator(&samples, &plan)?;
    write(&cfg.out.join(ESTIMATOR_FILE), estimator.to_bytes())?;

    let tune_cfg = TuneConfig {
        ga: cfg.ga,
        classifier: cfg.classifier(),
        ..TuneConfig::default()
    };
    let tuned = tune_all(&samples, &plan, &tune_cfg)?;

    let mut log = format!("# seed={}\n# angle,generation,fitness,chromosome,ccr_a,ccr_b,ccr_c\n", cfg.seed);
    for t in &tuned {
        for g in &t.evolution.history {
            let _ = writeln!(log, "{:03},{}", t.view.degrees(), g.to_log_line());
        }
    }
    log.push_str("# refined: angle,s_h,s_m,s_f,w_h,w_l,w_r,w_f,fitness\n");
    let mut hypotheses = BTreeMap::new();
    for t in &tuned {
        let _ = writeln!(log, "{},{:.6}", t.hypothesis.to_record(t.view), t.report.fitness);
        println!(
            "{:>3}  {}  fitness {:.4}  area {:.1}%",
            t.view.degrees(),
            t.hypothesis.to_record(t.view),
            t.report.fitness,
            100.0 * mask_area_fraction(&build_mask(&t.hypothesis))
        );
        hypotheses.insert(t.view, t.hypothesis);
    }
    write(&cfg.out.join(EVOLUTION_LOG), log)?;
    write(&cfg.out.join(HYPOTHESES_FILE), format_hypotheses(cfg.seed, &hypotheses))?;
    Ok(())
}

/// CSV with the run seed as a leading comment.
pub fn table_csv(seed: u64, table: &CcrTable) -> String {
    format!("# seed={seed}\n{}", table.to_csv())
}

pub fn evaluate(cfg: &RunConfig, whole: bool) -> Result<()> {
    let samples = load_samples(cfg)?;
    let plan = split(cfg, &samples)?;
    let hypotheses = if whole {
        uniform_hypotheses(&ViewAngle::ALL, GtsHypothesis::whole())
    } else {
        let path = cfg.hypotheses_path();
        let text = String::from_utf8(read(&path)?)
            .map_err(|_| GtsError::Format(format!("{} is not UTF-8", path.display())))?;
        parse_hypotheses(&text)?
    };
    let estimator = fit_view_estimator(&samples, &plan)?;
    let table = evaluate_view_invariant(&samples, &plan, &hypotheses, &estimator, cfg.classifier())?;
    let name = if whole { CCR_TABLE_WHOLE } else { CCR_TABLE };
    write(&cfg.out.join(name), table_csv(cfg.seed, &table))?;
    write(&cfg.out.join(name).with_extension("txt"), table.to_text())?;
    print!("{}", table.to_text());
    Ok(())
}

fn sequence_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| GtsError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    frames.sort();
    Ok(frames)
}

pub fn estimate_view(cfg: &RunConfig, sequence: Option<&Path>) -> Result<()> {
    if let Some(dir) = sequence {
        let estimator = ViewEstimator::from_bytes(&read(&cfg.out.join(ESTIMATOR_FILE))?)?;
        let frames = sequence_frames(dir)?
            .iter()
            .map(|p| read_gray_png(p))
            .collect::<Result<Vec<_>>>()?;
        let features = sequence_view_features(&frames)?;
        println!("{}", estimator.estimate(&features).degrees());
        return Ok(());
    }
    let samples = load_samples(cfg)?;
    let plan = split(cfg, &samples)?;
    let estimator = fit_view_estimator(&samples, &plan)?;
    write(&cfg.out.join(ESTIMATOR_FILE), estimator.to_bytes())?;
    let mut hits: BTreeMap<ViewAngle, (usize, usize)> = BTreeMap::new();
    for s in samples.iter().filter(|s| plan.is_evaluation(s.template.subject)) {
        let cell = hits.entry(s.template.view).or_default();
        cell.1 += 1;
        if estimator.estimate(&s.features) == s.template.view {
            cell.0 += 1;
        }
    }
    let (mut ok, mut total) = (0, 0);
    for (view, (h, n)) in &hits {
        println!("{:>3}  {h}/{n}", view.degrees());
        ok += h;
        total += n;
    }
    println!("all  {ok}/{total}");
    Ok(())
}
