//! Classifier heads over frozen feature matrices.
//!
//! Four families share one [`HeadModel`] container:
//!
//! - weighted softmax logistic regression trained by mini-batch gradient
//!   descent on [`weighted_ce_loss`],
//! - one-vs-rest linear SVM (hinge loss, sub-gradient descent) with a
//!   per-class sigmoid fitted on its margins,
//! - multiclass AdaBoost (SAMME) over decision stumps,
//! - gradient-boosted regression trees on the multiclass logistic loss.
//!
//! Every trainer is deterministic: identical inputs and configuration give
//! bit-identical parameters.

mod adaboost;
mod gbdt;
mod linear;
mod loss;

pub use adaboost::{train_adaboost, Stump};
pub use gbdt::{train_gbdt, GbdtConfig, GbdtParams, Node, Tree};
pub use linear::{train_linear_svm, train_logistic, LearningRateSchedule};
pub use loss::{softmax, weighted_ce_loss};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::ThresholdConfig;
use crate::corpus::LabelSchema;
use crate::features::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum HeadError {
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("boosting needs at least one round")]
    ZeroRounds,
    #[error("training data must contain at least two classes")]
    TooFewClasses,
    #[error("no training rows")]
    Empty,
    #[error("model parameters do not match kind {0}")]
    KindMismatch(HeadKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Logistic,
    LinearSvm,
    Adaboost,
    Gbdt,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Logistic => "logistic",
            HeadKind::LinearSvm => "linear_svm",
            HeadKind::Adaboost => "adaboost",
            HeadKind::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(HeadKind::Logistic),
            "linear_svm" | "svm" => Ok(HeadKind::LinearSvm),
            "adaboost" | "adb" => Ok(HeadKind::Adaboost),
            "gbdt" | "lgb" => Ok(HeadKind::Gbdt),
            other => Err(format!("unknown head kind {other:?}")),
        }
    }
}

/// Optimization settings for the linear heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    /// Probability of zeroing each input feature during training; 0 disables.
    pub input_dropout: f64,
    pub class_weights: Vec<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_schema(schema: &LabelSchema) -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 40,
            batch_size: 8,
            warmup_ratio: 0.0,
            weight_decay: 0.0,
            input_dropout: 0.0,
            class_weights: schema.default_class_weights(),
            seed: 0,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<(), HeadError> {
        let bad = |msg: String| Err(HeadError::InvalidConfig(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if ![4, 8, 16].contains(&self.batch_size) {
            return bad(format!("batch_size {} not in {{4, 8, 16}}", self.batch_size));
        }
        if !(0.0..=0.3).contains(&self.warmup_ratio) {
            return bad(format!("warmup_ratio {} outside [0, 0.3]", self.warmup_ratio));
        }
        if !(0.0..=0.1).contains(&self.weight_decay) {
            return bad(format!("weight_decay {} outside [0, 0.1]", self.weight_decay));
        }
        if self.input_dropout != 0.0 && !(0.1..=0.3).contains(&self.input_dropout) {
            return bad(format!("input_dropout {} must be 0 or in [0.1, 0.3]", self.input_dropout));
        }
        if self.class_weights.len() != n_classes {
            return bad(format!("{} class weights for {n_classes} classes", self.class_weights.len()));
        }
        if self.class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return bad("class weights must be strictly positive".into());
        }
        Ok(())
    }
}

/// Training settings recorded with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadConfig {
    Linear(TrainConfig),
    Adaboost { rounds: usize, seed: u64 },
    Gbdt(GbdtConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// `classes x features`
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearParams {
    pub(crate) fn zeros(k: usize, d: usize) -> Self {
        Self {
            weights: vec![vec![0.0; d]; k],
            biases: vec![0.0; k],
        }
    }

    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let dot: f64 = w.iter().zip(x.iter()).map(|(a, v)| a * v).sum();
                dot + b
            })
            .collect()
    }
}

/// Platt sigmoid `P(class | margin) = 1 / (1 + exp(a * margin + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn apply(&self, margin: f64) -> f64 {
        let z = self.a * margin + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameters {
    Logistic(LinearParams),
    LinearSvm {
        linear: LinearParams,
        calibration: Vec<Sigmoid>,
    },
    Adaboost {
        stumps: Vec<Stump>,
    },
    Gbdt(GbdtParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub metric: String,
    pub value: f64,
}

/// A trained head plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub kind: HeadKind,
    pub schema: LabelSchema,
    pub feature_dim: usize,
    pub parameters: Parameters,
    pub train_config: HeadConfig,
    pub training_log: Vec<LogEntry>,
    /// Calibrated binary decision threshold, when one has been tuned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdConfig>,
}

impl HeadModel {
    pub fn n_classes(&self) -> usize {
        self.schema.len()
    }

    fn check_kind(&self) -> Result<(), HeadError> {
        let ok = matches!(
            (self.kind, &self.parameters),
            (HeadKind::Logistic, Parameters::Logistic(_))
                | (HeadKind::LinearSvm, Parameters::LinearSvm { .. })
                | (HeadKind::Adaboost, Parameters::Adaboost { .. })
                | (HeadKind::Gbdt, Parameters::Gbdt(_))
        );
        if ok {
            Ok(())
        } else {
            Err(HeadError::KindMismatch(self.kind))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let model: Self = serde_json::from_str(s).map_err(|e| e.to_string())?;
        model.check_kind().map_err(|e| e.to_string())?;
        Ok(model)
    }

    /// Class labels: the calibrated threshold for binary models that have
    /// one, argmax otherwise.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>, HeadError> {
        let proba = predict_proba(self, x)?;
        Ok(match (&self.threshold, self.n_classes()) {
            (Some(t), 2) => proba.rows().into_iter().map(|r| usize::from(r[1] >= t.threshold)).collect(),
            _ => proba.rows().into_iter().map(|r| argmax(r)).collect(),
        })
    }
}

/// Trains a head of `kind`; `config` must be the matching variant
/// (`Linear` for logistic and SVM heads).
pub fn train_head(kind: HeadKind, x: &FeatureMatrix, labels: &[usize], schema: &LabelSchema, config: &HeadConfig) -> Result<HeadModel, HeadError> {
    match (kind, config) {
        (HeadKind::Logistic, HeadConfig::Linear(c)) => train_logistic(x, labels, schema, c),
        (HeadKind::LinearSvm, HeadConfig::Linear(c)) => train_linear_svm(x, labels, schema, c),
        (HeadKind::Adaboost, HeadConfig::Adaboost { rounds, seed }) => train_adaboost(x, labels, schema, *rounds, *seed),
        (HeadKind::Gbdt, HeadConfig::Gbdt(c)) => train_gbdt(x, labels, schema, c),
        _ => Err(HeadError::InvalidConfig(format!("configuration does not match head {kind}"))),
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities, one row per feature row, each summing to 1.
pub fn predict_proba(model: &HeadModel, x: &FeatureMatrix) -> Result<Array2<f64>, HeadError> {
    if x.dim() != model.feature_dim {
        return Err(HeadError::DimensionMismatch {
            expected: model.feature_dim,
            found: x.dim(),
        });
    }
    model.check_kind()?;
    let k = model.n_classes();
    let mut out = Array2::zeros((x.rows(), k));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let xi = x.row(i);
        let probs = match &model.parameters {
            Parameters::Logistic(p) => softmax(ArrayView1::from(&p.scores(xi))),
            Parameters::LinearSvm { linear, calibration } => {
                let raw: Vec<f64> = linear
                    .scores(xi)
                    .iter()
                    .zip(calibration)
                    .map(|(m, s)| s.apply(*m))
                    .collect();
                let sum: f64 = raw.iter().sum();
                if sum > 0.0 {
                    raw.iter().map(|p| p / sum).collect()
                } else {
                    vec![1.0 / k as f64; k]
                }
            }
            Parameters::Adaboost { stumps } => adaboost::vote_shares(stumps, xi, k),
            Parameters::Gbdt(p) => softmax(ArrayView1::from(&p.scores(xi))),
        };
        for (dst, p) in row.iter_mut().zip(probs) {
            *dst = p;
        }
    }
    Ok(out)
}

/// Checks labels against rows and classes; returns the number of classes
/// actually present.
pub(crate) fn check_labels(x: &FeatureMatrix, labels: &[usize], k: usize) -> Result<usize, HeadError> {
    if x.rows() != labels.len() {
        return Err(HeadError::LengthMismatch {
            rows: x.rows(),
            labels: labels.len(),
        });
    }
    if x.rows() == 0 {
        return Err(HeadError::Empty);
    }
    let mut seen = vec![false; k];
    for &y in labels {
        if y >= k {
            return Err(HeadError::LabelOutOfRange { label: y, classes: k });
        }
        seen[y] = true;
    }
    Ok(seen.iter().filter(|s| **s).count())
}

/// Nonzero entries of each row; training loops skip zero features.
pub(crate) fn sparse_rows(x: &FeatureMatrix) -> Vec<Vec<(usize, f64)>> {
    x.data()
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
        .collect()
}
