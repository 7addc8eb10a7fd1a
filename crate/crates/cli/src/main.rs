//! `ghalib`: split, analyze, train, tune, calibrate, evaluate and predict
//! hope-speech classifiers from the command line.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data error.

mod commands;
mod config;
mod data;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ghalib::eda::StopwordPolicy;
use ghalib::heads::HeadKind;
use ghalib::{Language, Split, Task};

use config::{BackendKind, ConfigLayer, RunConfig, TrainOverrides};

/// A bad flag, option value or config file (exit status 1).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "ghalib", version, about = "Multilingual hope-speech classification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random step [default: $GHALIB_SEED, else 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// binary or multi
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<Task>,
    /// Language scope, comma-separated (en, ur, es, de) [default: all]
    #[arg(long = "language", global = true, value_delimiter = ',', value_parser = parse_language)]
    languages: Vec<Language>,
    /// Corpus file (.jsonl or .csv) [default: corpus.jsonl]
    #[arg(long, visible_alias = "in", global = true)]
    corpus: Option<PathBuf>,
    /// Split plan [default: splits.json]
    #[arg(long, global = true)]
    splits: Option<PathBuf>,
    /// Model file [default: model.json]
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Args, Default)]
struct FeatureArgs {
    /// Feature backend
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// GHEM file covering the in-scope records in corpus order; repeat to concatenate
    #[arg(long = "features")]
    features: Vec<PathBuf>,
    /// Hashed TF-IDF dimension
    #[arg(long)]
    tfidf_dim: Option<usize>,
    /// Word n-gram range as lo,hi
    #[arg(long, value_parser = parse_pair)]
    ngram: Option<(usize, usize)>,
}

#[derive(Args, Default)]
struct TrainArgs {
    /// Classifier head (logistic, linear_svm, adaboost, gbdt)
    #[arg(long, value_parser = parse_head)]
    head: Option<HeadKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Per-class loss weights, comma-separated
    #[arg(long, value_delimiter = ',')]
    class_weights: Option<Vec<f64>>,
    /// Boosting rounds
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Stratified train/val/test split
    Split {
        /// Train,val,test fractions
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<[f64; 3]>,
        /// Output plan [default: the --splits path]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label distribution, length statistics and top tokens
    Analyze {
        /// Output directory [default: eda]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// none or per_language_list
        #[arg(long, value_parser = parse_stopwords)]
        stopwords: Option<StopwordPolicy>,
    },
    /// Train one head with fixed settings
    Train {
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Random hyperparameter search; keeps the best model
    Tune {
        #[arg(long)]
        trials: Option<usize>,
        /// Study log [default: study.jsonl]
        #[arg(long)]
        study: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Pick the binary decision threshold on the val split
    Calibrate {
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long = "features")]
        features: Vec<PathBuf>,
    },
    /// Metrics on a split
    Evaluate {
        /// train, val or test [default: test]
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
        /// Output directory [default: .]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "features")]
        features: Vec<PathBuf>,
    },
    /// Label a corpus; labels in the input are never read
    Predict {
        /// Output [default: predictions.jsonl]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "features")]
        features: Vec<PathBuf>,
    },
    /// Identify the language of every record
    Langid {
        /// Corpus whose known-language records build the profiles [default: the input corpus]
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Output [default: langid.jsonl]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

fn parse_language(s: &str) -> Result<Language, String> {
    match s.parse()? {
        Language::Unknown => Err("scope languages are en, ur, es, de".into()),
        l => Ok(l),
    }
}

fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

fn parse_stopwords(s: &str) -> Result<StopwordPolicy, String> {
    match s {
        "none" => Ok(StopwordPolicy::None),
        "per_language_list" | "per-language-list" => Ok(StopwordPolicy::PerLanguageList),
        _ => Err("expected none or per_language_list".into()),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect()
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    parse_floats(s)?.try_into().map_err(|_| "expected three comma-separated fractions".to_string())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    match s.split_once(',') {
        Some((a, b)) => Ok((
            a.trim().parse().map_err(|e| format!("{e}"))?,
            b.trim().parse().map_err(|e| format!("{e}"))?,
        )),
        None => Err("expected lo,hi".into()),
    }
}

impl Common {
    fn layer(self) -> (ConfigLayer, Option<PathBuf>) {
        let layer = ConfigLayer {
            seed: self.seed,
            jobs: self.jobs,
            task: self.task,
            languages: (!self.languages.is_empty()).then_some(self.languages),
            corpus: self.corpus,
            splits: self.splits,
            model: self.model,
            ..ConfigLayer::default()
        };
        (layer, self.config)
    }
}

fn features_into(layer: &mut ConfigLayer, files: Vec<PathBuf>) {
    if !files.is_empty() {
        layer.features = Some(files);
    }
}

impl FeatureArgs {
    fn apply(self, layer: &mut ConfigLayer) {
        layer.backend = self.backend;
        layer.tfidf_dim = self.tfidf_dim;
        layer.ngram_range = self.ngram;
        features_into(layer, self.features);
    }
}

impl TrainArgs {
    fn apply(self, layer: &mut ConfigLayer) {
        layer.head = self.head;
        layer.train = TrainOverrides {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            warmup_ratio: self.warmup,
            weight_decay: self.weight_decay,
            input_dropout: self.dropout,
            class_weights: self.class_weights,
            rounds: self.rounds,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        };
    }
}

fn run(cli: Cli) -> Result<()> {
    let (mut layer, config_path) = cli.common.layer();
    let mut profiles = None;
    let name = match cli.command {
        Command::Split { ratios, out } => {
            layer.ratios = ratios;
            layer.out = out;
            "split"
        }
        Command::Analyze { out, top_k, stopwords } => {
            layer.out = out;
            layer.top_k = top_k;
            layer.stopwords = stopwords;
            "analyze"
        }
        Command::Train { features, train } => {
            features.apply(&mut layer);
            train.apply(&mut layer);
            "train"
        }
        Command::Tune { trials, study, features, train } => {
            layer.trials = trials;
            layer.out = study;
            features.apply(&mut layer);
            train.apply(&mut layer);
            "tune"
        }
        Command::Calibrate { lo, hi, step, features } => {
            layer.threshold_lo = lo;
            layer.threshold_hi = hi;
            layer.threshold_step = step;
            features_into(&mut layer, features);
            "calibrate"
        }
        Command::Evaluate { split, out, features } => {
            layer.split = split.map(|s| s.as_str().to_string());
            layer.out = out;
            features_into(&mut layer, features);
            "evaluate"
        }
        Command::Predict { out, features } => {
            layer.out = out;
            features_into(&mut layer, features);
            "predict"
        }
        Command::Langid { profiles: p, out } => {
            profiles = p;
            layer.out = out;
            "langid"
        }
    };
    let config = RunConfig::resolve(name, layer, config_path.as_deref())?;
    if let Some(jobs) = config.jobs {
        if jobs == 0 {
            return Err(Usage("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match name {
        "split" => commands::split(&config),
        "analyze" => commands::analyze_corpus(&config),
        "train" => commands::train(&config),
        "tune" => commands::tune(&config),
        "calibrate" => commands::calibrate(config),
        "evaluate" => commands::evaluate(config),
        "predict" => commands::predict(config),
        _ => commands::langid(&config, profiles),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                eprintln!("see `ghalib --help`");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
