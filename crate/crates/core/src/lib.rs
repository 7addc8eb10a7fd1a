//! Multilingual hope-speech classification pipeline.
//!
//! The crate is organised along the stages of the workflow:
//!
//! - [`corpus`]: loading, normalization and stratified splitting of labeled text.
//! - [`langid`]: character n-gram language identification and encoder routing.
//! - [`features`]: embedding-file ingestion (`GHEM`), hashed TF-IDF and concatenation.
//! - [`heads`]: weighted logistic regression, linear SVM, AdaBoost (SAMME) and
//!   gradient-boosted trees over frozen feature matrices.
//! - [`tune`]: seeded random hyperparameter search.
//! - [`calibrate`]: binary decision-threshold sweep.
//! - [`metrics`]: confusion matrices and precision/recall/F1 reports.
//! - [`eda`]: label distributions, length statistics and token frequencies.
//!
//! Every stochastic step draws from a generator derived from an explicit seed
//! (see [`rng`]), so identical inputs always reproduce identical artifacts.

pub mod calibrate;
pub mod corpus;
pub mod eda;
pub mod features;
pub mod heads;
pub mod langid;
pub mod metrics;
pub mod rng;
pub mod tune;

pub use corpus::{Language, LabelId, LabelSchema, Record, Split, SplitPlan, Task};
pub use features::FeatureMatrix;
pub use heads::{HeadKind, HeadModel, TrainConfig};
pub use metrics::{ConfusionMatrix, MetricsReport};
