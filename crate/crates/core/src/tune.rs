//! Seeded random hyperparameter search.
//!
//! Trial `t` samples its configuration from a generator keyed on
//! `(seed, t)`, so any trial can be re-run alone and parallel studies equal
//! sequential ones. The objective is validation macro-F1; the best trial is
//! the highest objective, the lowest index on ties.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabelSchema;
use crate::features::FeatureMatrix;
use crate::heads::{train_head, GbdtConfig, HeadConfig, HeadError, HeadKind, HeadModel, TrainConfig};
use crate::metrics::evaluate;
use crate::rng::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error("search budget must be at least 1")]
    ZeroBudget,
    #[error("every trial failed; first error: {0}")]
    AllTrialsFailed(String),
}

/// Ranges searched by [`random_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub warmup_ratio: (f64, f64),
    pub weight_decay: (f64, f64),
    pub input_dropout: (f64, f64),
    pub adaboost_rounds: Vec<usize>,
    pub gbdt_rounds: Vec<usize>,
    pub gbdt_depth: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (5e-6, 5e-5),
            batch_size: vec![4, 8, 16],
            warmup_ratio: (0.0, 0.3),
            weight_decay: (0.0, 0.1),
            input_dropout: (0.1, 0.3),
            adaboost_rounds: vec![25, 50, 100],
            gbdt_rounds: vec![50, 100, 200],
            gbdt_depth: vec![2, 3, 4],
        }
    }
}

/// One point of the search space. Every field is drawn for every trial, so
/// the random stream does not depend on the head being tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub input_dropout: f64,
    pub adaboost_rounds: usize,
    pub gbdt_rounds: usize,
    pub gbdt_depth: usize,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn choose<R: Rng, T: Copy>(rng: &mut R, options: &[T]) -> T {
    options[rng.gen_range(0..options.len())]
}

impl SearchSpace {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> SampledConfig {
        let (lo, hi) = self.learning_rate;
        let learning_rate = uniform(rng, (lo.ln(), hi.ln())).exp().clamp(lo, hi);
        SampledConfig {
            learning_rate,
            batch_size: choose(rng, &self.batch_size),
            warmup_ratio: uniform(rng, self.warmup_ratio),
            weight_decay: uniform(rng, self.weight_decay),
            input_dropout: uniform(rng, self.input_dropout),
            adaboost_rounds: choose(rng, &self.adaboost_rounds),
            gbdt_rounds: choose(rng, &self.gbdt_rounds),
            gbdt_depth: choose(rng, &self.gbdt_depth),
        }
    }

    pub fn contains(&self, c: &SampledConfig) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        within(c.learning_rate, self.learning_rate)
            && self.batch_size.contains(&c.batch_size)
            && within(c.warmup_ratio, self.warmup_ratio)
            && within(c.weight_decay, self.weight_decay)
            && within(c.input_dropout, self.input_dropout)
            && self.adaboost_rounds.contains(&c.adaboost_rounds)
            && self.gbdt_rounds.contains(&c.gbdt_rounds)
            && self.gbdt_depth.contains(&c.gbdt_depth)
    }
}

impl SampledConfig {
    /// Linear-head settings: `base` with the sampled fields applied. The
    /// sampled learning rate is multiplied by `lr_scale` and the decay
    /// divided by it, so the per-step shrinkage `lr * decay` is unchanged.
    pub fn train_config(&self, base: &TrainConfig, lr_scale: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate * lr_scale,
            batch_size: self.batch_size,
            warmup_ratio: self.warmup_ratio,
            weight_decay: self.weight_decay / lr_scale,
            input_dropout: self.input_dropout,
            ..base.clone()
        }
    }

    pub fn gbdt_config(&self, base: &GbdtConfig) -> GbdtConfig {
        GbdtConfig {
            rounds: self.gbdt_rounds,
            max_depth: self.gbdt_depth,
            ..base.clone()
        }
    }
}

/// Multiplier from the sampled learning rate to the step size used by the
/// linear heads. Sampled rates sit in the fine-tuning range; heads trained
/// from zero on frozen features need steps about this much larger.
pub const HEAD_LR_SCALE: f64 = 1e5;

/// Head settings for one trial: sampled fields over the given bases.
pub fn head_config(kind: HeadKind, c: &SampledConfig, linear: &TrainConfig, gbdt: &GbdtConfig, lr_scale: f64) -> HeadConfig {
    match kind {
        HeadKind::Logistic | HeadKind::LinearSvm => HeadConfig::Linear(c.train_config(linear, lr_scale)),
        HeadKind::Adaboost => HeadConfig::Adaboost {
            rounds: c.adaboost_rounds,
            seed: linear.seed,
        },
        HeadKind::Gbdt => HeadConfig::Gbdt(c.gbdt_config(gbdt)),
    }
}

/// Everything a head-tuning study needs besides the search space.
#[derive(Debug, Clone)]
pub struct HeadStudy<'a> {
    pub kind: HeadKind,
    pub schema: &'a LabelSchema,
    pub train_x: &'a FeatureMatrix,
    pub train_y: &'a [usize],
    pub val_x: &'a FeatureMatrix,
    pub val_y: &'a [usize],
    pub linear: TrainConfig,
    pub gbdt: GbdtConfig,
    pub lr_scale: f64,
}

impl HeadStudy<'_> {
    pub fn train(&self, c: &SampledConfig) -> Result<HeadModel, HeadError> {
        let config = head_config(self.kind, c, &self.linear, &self.gbdt, self.lr_scale);
        train_head(self.kind, self.train_x, self.train_y, self.schema, &config)
    }

    /// Validation macro-F1 of argmax predictions.
    pub fn evaluate(&self, model: &HeadModel) -> Result<f64, HeadError> {
        let pred = model.predict(self.val_x)?;
        let (_, r) = evaluate(self.val_y, &pred, self.schema.len()).map_err(|e| HeadError::InvalidConfig(e.to_string()))?;
        Ok(r.macro_f1)
    }

    /// Runs the study, in parallel when `parallel` is set.
    pub fn run(&self, space: &SearchSpace, budget: usize, seed: u64, parallel: bool) -> Result<Study<HeadModel>, TuneError> {
        let train = |c: &SampledConfig| self.train(c);
        let eval = |m: &HeadModel| self.evaluate(m);
        if parallel {
            random_search_parallel(space, budget, seed, train, eval)
        } else {
            random_search(space, budget, seed, train, eval)
        }
    }
}

/// Configuration of trial `trial_index` in a study seeded with `seed`.
pub fn sample_trial(space: &SearchSpace, seed: u64, trial_index: usize) -> SampledConfig {
    space.sample(&mut stream_rng(seed, trial_index as u64))
}

mod objective_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult<M> {
    pub trial_index: usize,
    pub config: SampledConfig,
    /// Validation macro-F1; `-inf` (serialized as null) for failed trials.
    #[serde(with = "objective_serde")]
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub model: Option<M>,
}

impl<M> TrialResult<M> {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    /// Same result without the trained model.
    pub fn summary(&self) -> TrialResult<()> {
        TrialResult {
            trial_index: self.trial_index,
            config: self.config.clone(),
            objective: self.objective,
            error: self.error.clone(),
            model: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Study<M> {
    pub best: usize,
    pub trials: Vec<TrialResult<M>>,
}

impl<M> Study<M> {
    pub fn best(&self) -> &TrialResult<M> {
        &self.trials[self.best]
    }

    pub fn into_best(mut self) -> TrialResult<M> {
        self.trials.swap_remove(self.best)
    }

    /// One JSON object per trial, in trial order.
    pub fn to_jsonl(&self) -> String {
        self.trials
            .iter()
            .map(|t| serde_json::to_string(&t.summary()).expect("trial serializes") + "\n")
            .collect()
    }
}

fn run_trial<M, E, T, V>(space: &SearchSpace, seed: u64, t: usize, train_fn: &T, eval_fn: &V) -> TrialResult<M>
where
    E: std::fmt::Display,
    T: Fn(&SampledConfig) -> Result<M, E>,
    V: Fn(&M) -> Result<f64, E>,
{
    let config = sample_trial(space, seed, t);
    let outcome = train_fn(&config).and_then(|m| eval_fn(&m).map(|score| (m, score)));
    match outcome {
        Ok((model, objective)) => TrialResult {
            trial_index: t,
            config,
            objective,
            error: None,
            model: Some(model),
        },
        Err(e) => TrialResult {
            trial_index: t,
            config,
            objective: f64::NEG_INFINITY,
            error: Some(e.to_string()),
            model: None,
        },
    }
}

fn finish<M>(trials: Vec<TrialResult<M>>) -> Result<Study<M>, TuneError> {
    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        if t.succeeded() && best.is_none_or(|b| t.objective > trials[b].objective) {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(Study { best, trials }),
        None => Err(TuneError::AllTrialsFailed(
            trials.first().and_then(|t| t.error.clone()).unwrap_or_default(),
        )),
    }
}

/// Runs `budget` trials sequentially. A trial whose training or evaluation
/// fails is recorded with objective `-inf` and the study continues.
pub fn random_search<M, E, T, V>(space: &SearchSpace, budget: usize, seed: u64, train_fn: T, eval_fn: V) -> Result<Study<M>, TuneError>
where
    E: std::fmt::Display,
    T: Fn(&SampledConfig) -> Result<M, E>,
    V: Fn(&M) -> Result<f64, E>,
{
    if budget == 0 {
        return Err(TuneError::ZeroBudget);
    }
    let trials = (0..budget)
        .map(|t| run_trial(space, seed, t, &train_fn, &eval_fn))
        .collect();
    finish(trials)
}

/// [`random_search`] with trials spread over the rayon pool; the result is
/// identical to the sequential run.
pub fn random_search_parallel<M, E, T, V>(space: &SearchSpace, budget: usize, seed: u64, train_fn: T, eval_fn: V) -> Result<Study<M>, TuneError>
where
    M: Send,
    E: std::fmt::Display,
    T: Fn(&SampledConfig) -> Result<M, E> + Sync,
    V: Fn(&M) -> Result<f64, E> + Sync,
{
    if budget == 0 {
        return Err(TuneError::ZeroBudget);
    }
    let trials = (0..budget)
        .into_par_iter()
        .map(|t| run_trial(space, seed, t, &train_fn, &eval_fn))
        .collect();
    finish(trials)
}
