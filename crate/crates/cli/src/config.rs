//! Run settings: command-line flags layered over an optional `key=value` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use gts_core::classifier::Decision;
use gts_core::dataset::DEFAULT_TUNING_SUBJECTS;
use gts_core::ga::GaConfig;
use gts_core::pipeline::ClassifierConfig;
use gts_core::templates::TemplateKind;
use gts_core::{GtsError, Result};

const KEYS: [&str; 12] = [
    "corpus",
    "template",
    "seed",
    "jobs",
    "out",
    "hypotheses",
    "knn",
    "tuning-subjects",
    "generations",
    "population",
    "crossover",
    "mutation",
];

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Settings file of `key=value` lines; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus root in the CASIA-B layout
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Template kind: gei, geni or aei
    #[arg(long, global = true)]
    pub template: Option<String>,
    /// Seed for the subject split and the GA
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: logical CPU count]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Fixed hypothesis file for `evaluate`
    #[arg(long, global = true)]
    pub hypotheses: Option<PathBuf>,
    /// Classify with k nearest neighbours instead of Gaussian Bayes
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "1", value_name = "K")]
    pub knn: Option<usize>,
    /// Subjects held out for tuning [default: 24]
    #[arg(long, global = true)]
    pub tuning_subjects: Option<usize>,
    #[arg(long, global = true)]
    pub generations: Option<usize>,
    #[arg(long, global = true)]
    pub population: Option<usize>,
    #[arg(long, global = true)]
    pub crossover: Option<f64>,
    #[arg(long, global = true)]
    pub mutation: Option<f64>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub template: TemplateKind,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub hypotheses: Option<PathBuf>,
    pub decision: Decision,
    pub tuning_subjects: usize,
    pub ga: GaConfig,
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are read as dashes.
pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| GtsError::InvalidConfig(format!("expected key=value, got {line:?}")))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(GtsError::InvalidConfig(format!("unknown setting {key:?}")));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| GtsError::InvalidConfig(format!("bad value for {key}: {v:?}")))
        })
        .transpose()
}

impl RunConfig {
    pub fn load(flags: &Flags) -> Result<Self> {
        let text = match &flags.config {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| GtsError::Io {
                path: p.clone(),
                source: e,
            })?),
            None => None,
        };
        Self::resolve(flags, text.as_deref())
    }

    pub fn resolve(flags: &Flags, file: Option<&str>) -> Result<Self> {
        let file = file.map(parse_settings).transpose()?.unwrap_or_default();
        let seed = pick(flags.seed, &file, "seed")?.unwrap_or(0);
        let template = match pick(flags.template.clone(), &file, "template")? {
            Some(s) => s.parse()?,
            None => TemplateKind::Gei,
        };
        let decision = match pick(flags.knn, &file, "knn")? {
            Some(0) => return Err(GtsError::InvalidConfig("knn needs k >= 1".into())),
            Some(k) => Decision::Knn(k),
            None => Decision::Bayes,
        };
        let defaults = GaConfig::default();
        let ga = GaConfig {
            population: pick(flags.population, &file, "population")?.unwrap_or(defaults.population),
            generations: pick(flags.generations, &file, "generations")?.unwrap_or(defaults.generations),
            crossover_prob: pick(flags.crossover, &file, "crossover")?.unwrap_or(defaults.crossover_prob),
            mutation_prob: pick(flags.mutation, &file, "mutation")?.unwrap_or(defaults.mutation_prob),
            seed,
        };
        ga.validate()?;
        let jobs = pick(flags.jobs, &file, "jobs")?;
        if jobs == Some(0) {
            return Err(GtsError::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(RunConfig {
            corpus: pick(flags.corpus.clone(), &file, "corpus")?,
            template,
            seed,
            jobs,
            out: pick(flags.out.clone(), &file, "out")?.unwrap_or_else(|| PathBuf::from("gts-out")),
            hypotheses: pick(flags.hypotheses.clone(), &file, "hypotheses")?,
            decision,
            tuning_subjects: pick(flags.tuning_subjects, &file, "tuning-subjects")?
                .unwrap_or(DEFAULT_TUNING_SUBJECTS),
            ga,
        })
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            decision: self.decision,
            ..ClassifierConfig::default()
        }
    }

    pub fn corpus(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| GtsError::InvalidConfig("--corpus is required".into()))
    }

    pub fn templates_dir(&self) -> PathBuf {
        self.out.join("templates")
    }

    pub fn hypotheses_path(&self) -> PathBuf {
        self.hypotheses
            .clone()
            .unwrap_or_else(|| self.out.join("hypotheses.txt"))
    }
}
