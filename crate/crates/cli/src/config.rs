//! Run configuration: command-line flags over an optional JSON file over
//! built-in defaults, plus the provenance block written into artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ghalib::calibrate::{DEFAULT_HI, DEFAULT_LO, DEFAULT_STEP};
use ghalib::corpus::{CorpusFormat, SplitRatios};
use ghalib::eda::StopwordPolicy;
use ghalib::heads::{GbdtConfig, HeadKind};
use ghalib::{LabelSchema, Language, Task, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Usage;

pub const SEED_ENV: &str = "GHALIB_SEED";

/// Step size for a directly trained linear head on L2-normalized features.
pub const DEFAULT_HEAD_LR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Tfidf,
    Ghem,
}

/// Head training overrides; unset fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub warmup_ratio: Option<f64>,
    pub weight_decay: Option<f64>,
    pub input_dropout: Option<f64>,
    pub class_weights: Option<Vec<f64>>,
    pub rounds: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: Option<usize>,
}

impl TrainOverrides {
    fn or(self, other: TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            learning_rate: self.learning_rate.or(other.learning_rate),
            epochs: self.epochs.or(other.epochs),
            batch_size: self.batch_size.or(other.batch_size),
            warmup_ratio: self.warmup_ratio.or(other.warmup_ratio),
            weight_decay: self.weight_decay.or(other.weight_decay),
            input_dropout: self.input_dropout.or(other.input_dropout),
            class_weights: self.class_weights.or(other.class_weights),
            rounds: self.rounds.or(other.rounds),
            max_depth: self.max_depth.or(other.max_depth),
            min_leaf: self.min_leaf.or(other.min_leaf),
        }
    }
}

/// Every setting a subcommand may read. In a config file all fields are
/// optional; flags fill the same structure and take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub languages: Option<Vec<Language>>,
    pub backend: Option<BackendKind>,
    pub head: Option<HeadKind>,
    pub corpus: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub features: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub ratios: Option<[f64; 3]>,
    pub trials: Option<usize>,
    pub jobs: Option<usize>,
    pub threshold_lo: Option<f64>,
    pub threshold_hi: Option<f64>,
    pub threshold_step: Option<f64>,
    pub tfidf_dim: Option<usize>,
    pub ngram_range: Option<(usize, usize)>,
    pub top_k: Option<usize>,
    pub stopwords: Option<StopwordPolicy>,
    pub split: Option<String>,
    #[serde(default)]
    pub train: TrainOverrides,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),*) => {
        ConfigLayer { $($f: $a.$f.or($b.$f),)* train: $a.train.or($b.train) }
    };
}

impl ConfigLayer {
    /// Fields set in `self` win over `other`.
    pub fn over(self, other: ConfigLayer) -> ConfigLayer {
        let (a, b) = (self, other);
        prefer!(a, b; seed, task, languages, backend, head, corpus, splits, model, features, out, ratios, trials, jobs,
            threshold_lo, threshold_hi, threshold_step, tfidf_dim, ngram_range, top_k, stopwords, split)
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| Usage(format!("invalid config {}: {e}", path.display())).into())
    }
}

/// Fully resolved settings. Its canonical JSON is the config digest input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub task: Task,
    pub languages: Vec<Language>,
    pub backend: BackendKind,
    pub head: HeadKind,
    pub corpus: PathBuf,
    pub splits: PathBuf,
    pub model: PathBuf,
    pub features: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub ratios: [f64; 3],
    pub trials: usize,
    pub threshold: (f64, f64, f64),
    pub tfidf_dim: usize,
    pub ngram_range: (usize, usize),
    pub top_k: usize,
    pub stopwords: StopwordPolicy,
    pub split: String,
    pub train: TrainOverrides,
    /// Thread cap; excluded from the digest since results do not depend on it.
    #[serde(skip)]
    pub jobs: Option<usize>,
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
        Err(_) => Ok(None),
    }
}

impl RunConfig {
    /// Flags over config file over defaults; the seed falls back to the
    /// environment before the default of 0.
    pub fn resolve(command: &str, flags: ConfigLayer, config_path: Option<&Path>) -> Result<RunConfig> {
        let file = match config_path {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        let c = flags.over(file);
        let seed = match c.seed {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(0),
        };
        let ratios = c.ratios.unwrap_or(SplitRatios::default().get());
        SplitRatios::new(ratios).map_err(|e| Usage(e.to_string()))?;
        if c.trials == Some(0) {
            return Err(Usage("--trials must be at least 1".into()).into());
        }
        let mut languages = c.languages.unwrap_or_default();
        languages.sort();
        languages.dedup();
        Ok(RunConfig {
            command: command.to_string(),
            seed,
            task: c.task.unwrap_or(Task::Binary),
            languages,
            backend: c.backend.unwrap_or(BackendKind::Tfidf),
            head: c.head.unwrap_or(HeadKind::Logistic),
            corpus: c.corpus.unwrap_or_else(|| "corpus.jsonl".into()),
            splits: c.splits.unwrap_or_else(|| "splits.json".into()),
            model: c.model.unwrap_or_else(|| "model.json".into()),
            features: c.features.unwrap_or_default(),
            out: c.out,
            ratios,
            trials: c.trials.unwrap_or(30),
            threshold: (
                c.threshold_lo.unwrap_or(DEFAULT_LO),
                c.threshold_hi.unwrap_or(DEFAULT_HI),
                c.threshold_step.unwrap_or(DEFAULT_STEP),
            ),
            tfidf_dim: c.tfidf_dim.unwrap_or(4096),
            ngram_range: c.ngram_range.unwrap_or((1, 1)),
            top_k: c.top_k.unwrap_or(20),
            stopwords: c.stopwords.unwrap_or(StopwordPolicy::None),
            split: c.split.unwrap_or_else(|| "test".into()),
            train: c.train,
            jobs: c.jobs,
        })
    }

    pub fn schema(&self) -> LabelSchema {
        LabelSchema::for_task(self.task)
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        CorpusFormat::from_path(&self.corpus).map_err(|e| Usage(e.to_string()).into())
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios::new(self.ratios).expect("validated in resolve")
    }

    /// Linear-head settings for `train`: defaults, then overrides.
    pub fn train_config(&self) -> TrainConfig {
        let schema = self.schema();
        let t = &self.train;
        let base = TrainConfig::for_schema(&schema);
        TrainConfig {
            learning_rate: t.learning_rate.unwrap_or(DEFAULT_HEAD_LR),
            epochs: t.epochs.unwrap_or(base.epochs),
            batch_size: t.batch_size.unwrap_or(base.batch_size),
            warmup_ratio: t.warmup_ratio.unwrap_or(base.warmup_ratio),
            weight_decay: t.weight_decay.unwrap_or(base.weight_decay),
            input_dropout: t.input_dropout.unwrap_or(base.input_dropout),
            class_weights: t.class_weights.clone().unwrap_or(base.class_weights),
            seed: self.seed,
        }
    }

    pub fn gbdt_config(&self) -> GbdtConfig {
        let base = GbdtConfig::default();
        GbdtConfig {
            rounds: self.train.rounds.unwrap_or(base.rounds),
            max_depth: self.train.max_depth.unwrap_or(base.max_depth),
            min_leaf: self.train.min_leaf.unwrap_or(base.min_leaf),
            seed: self.seed,
            ..base
        }
    }

    pub fn adaboost_rounds(&self) -> usize {
        self.train.rounds.unwrap_or(50)
    }

    pub fn provenance(&self) -> Provenance {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

/// Written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    /// Comment line for CSV and text artifacts.
    pub fn comment(&self) -> String {
        format!(
            "# tool_version={} seed={} config_digest={}\n",
            self.tool_version, self.seed, self.config_digest
        )
    }
}
