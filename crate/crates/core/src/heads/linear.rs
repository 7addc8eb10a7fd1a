//! Linear heads: weighted logistic regression and one-vs-rest linear SVM.
//!
//! Both run the same loop: zero-initialized parameters, per-epoch batch order
//! from a generator keyed on `(seed, epoch)`, optional inverted input
//! dropout, L2 decay on weights only, and a linear warmup followed by linear
//! decay of the learning rate.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_labels, sparse_rows, weighted_ce_loss, HeadConfig, HeadError, HeadKind, HeadModel, LinearParams, LogEntry,
    Parameters, Sigmoid, TrainConfig,
};
use crate::corpus::LabelSchema;
use crate::features::FeatureMatrix;
use crate::rng::stream_rng;

/// Warmup then linear decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateSchedule {
    pub base: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LearningRateSchedule {
    pub fn new(base: f64, total_steps: usize, warmup_ratio: f64) -> Self {
        Self {
            base,
            total_steps,
            warmup_steps: (warmup_ratio * total_steps as f64).floor() as usize,
        }
    }

    /// Rate for zero-based `step`.
    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.base * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            let remaining = self.total_steps.saturating_sub(step) as f64;
            let span = (self.total_steps - self.warmup_steps).max(1) as f64;
            self.base * remaining / span
        }
    }
}

type SparseRow = Vec<(usize, f64)>;

/// Per-epoch batch order and dropout masks.
struct Epoch {
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Epoch {
    fn new(seed: u64, epoch: usize, n: usize) -> Self {
        let mut rng = stream_rng(seed, epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self { order, rng }
    }

    fn drop_row(&mut self, row: &SparseRow, p: f64) -> SparseRow {
        if p == 0.0 {
            return row.clone();
        }
        let keep_scale = 1.0 / (1.0 - p);
        row.iter()
            .filter(|_| self.rng.gen::<f64>() >= p)
            .map(|&(j, v)| (j, v * keep_scale))
            .collect()
    }
}

fn sparse_scores(params: &LinearParams, row: &SparseRow) -> Vec<f64> {
    params
        .weights
        .iter()
        .zip(&params.biases)
        .map(|(w, b)| row.iter().map(|&(j, v)| w[j] * v).sum::<f64>() + b)
        .collect()
}

fn apply_decay(params: &mut LinearParams, lr: f64, decay: f64) {
    if decay > 0.0 {
        let factor = 1.0 - lr * decay;
        for w in params.weights.iter_mut().flatten() {
            *w *= factor;
        }
    }
}

/// Shared optimization loop. `step_fn` receives the (dropped-out) batch rows
/// and labels, returns the batch loss and accumulates its gradient into
/// `grad` (`classes x (features + 1)`, bias last).
fn run_sgd<F>(rows: &[SparseRow], labels: &[usize], k: usize, d: usize, config: &TrainConfig, mut step_fn: F) -> Result<(LinearParams, Vec<LogEntry>), HeadError>
where
    F: FnMut(&LinearParams, &[SparseRow], &[usize], &mut [Vec<f64>]) -> Result<f64, HeadError>,
{
    let n = rows.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let schedule = LearningRateSchedule::new(config.learning_rate, steps_per_epoch * config.epochs, config.warmup_ratio);
    let mut params = LinearParams::zeros(k, d);
    let mut grad = vec![vec![0.0; d + 1]; k];
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut epoch_rng = Epoch::new(config.seed, epoch, n);
        let order = std::mem::take(&mut epoch_rng.order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let batch_rows: Vec<SparseRow> = batch
                .iter()
                .map(|&i| epoch_rng.drop_row(&rows[i], config.input_dropout))
                .collect();
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            grad.iter_mut().flatten().for_each(|g| *g = 0.0);
            let loss = step_fn(&params, &batch_rows, &batch_labels, &mut grad)?;
            if !loss.is_finite() {
                return Err(HeadError::NonFiniteLoss { step });
            }
            epoch_loss += loss * batch.len() as f64;

            let lr = schedule.at(step);
            apply_decay(&mut params, lr, config.weight_decay);
            for (c, g) in grad.iter().enumerate() {
                for (j, gj) in g[..d].iter().enumerate() {
                    if *gj != 0.0 {
                        params.weights[c][j] -= lr * gj;
                    }
                }
                params.biases[c] -= lr * g[d];
            }
            step += 1;
        }
        log.push(LogEntry {
            step: epoch,
            metric: "train_loss".into(),
            value: epoch_loss / n as f64,
        });
    }
    Ok((params, log))
}

/// Weighted softmax regression by mini-batch gradient descent.
pub fn train_logistic(x: &FeatureMatrix, labels: &[usize], schema: &LabelSchema, config: &TrainConfig) -> Result<HeadModel, HeadError> {
    let k = schema.len();
    check_labels(x, labels, k)?;
    config.validate(k)?;
    let d = x.dim();
    let rows = sparse_rows(x);
    let weights = config.class_weights.clone();
    let (params, log) = run_sgd(&rows, labels, k, d, config, |params, batch, ys, grad| {
        let logits = Array2::from_shape_vec((batch.len(), k), batch.iter().flat_map(|r| sparse_scores(params, r)).collect())
            .expect("k scores per row");
        let (loss, dlogits) = weighted_ce_loss(logits.view(), ys, &weights)?;
        for (i, row) in batch.iter().enumerate() {
            for c in 0..k {
                let g = dlogits[[i, c]];
                for &(j, v) in row {
                    grad[c][j] += g * v;
                }
                grad[c][d] += g;
            }
        }
        Ok(loss)
    })?;
    Ok(HeadModel {
        kind: HeadKind::Logistic,
        schema: schema.clone(),
        feature_dim: d,
        parameters: Parameters::Logistic(params),
        train_config: HeadConfig::Linear(config.clone()),
        training_log: log,
        threshold: None,
    })
}

/// One-vs-rest L2-regularized hinge loss, then a Platt sigmoid per class.
pub fn train_linear_svm(x: &FeatureMatrix, labels: &[usize], schema: &LabelSchema, config: &TrainConfig) -> Result<HeadModel, HeadError> {
    let k = schema.len();
    check_labels(x, labels, k)?;
    config.validate(k)?;
    let d = x.dim();
    let rows = sparse_rows(x);
    let weights = config.class_weights.clone();
    let (params, log) = run_sgd(&rows, labels, k, d, config, |params, batch, ys, grad| {
        let inv_n = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (row, &y) in batch.iter().zip(ys) {
            let cost = weights[y];
            for (c, score) in sparse_scores(params, row).into_iter().enumerate() {
                let sign = if c == y { 1.0 } else { -1.0 };
                let margin = sign * score;
                if margin < 1.0 {
                    loss += cost * (1.0 - margin) * inv_n;
                    let g = -sign * cost * inv_n;
                    for &(j, v) in row {
                        grad[c][j] += g * v;
                    }
                    grad[c][d] += g;
                }
            }
        }
        Ok(loss)
    })?;

    let calibration = (0..k)
        .map(|c| {
            let margins: Vec<f64> = rows.iter().map(|r| sparse_scores(&params, r)[c]).collect();
            let targets: Vec<bool> = labels.iter().map(|&y| y == c).collect();
            fit_platt(&margins, &targets)
        })
        .collect();

    Ok(HeadModel {
        kind: HeadKind::LinearSvm,
        schema: schema.clone(),
        feature_dim: d,
        parameters: Parameters::LinearSvm {
            linear: params,
            calibration,
        },
        train_config: HeadConfig::Linear(config.clone()),
        training_log: log,
        threshold: None,
    })
}

/// Platt scaling with the regularized targets and Newton iteration of Lin,
/// Lin and Weng; deterministic for fixed inputs.
pub(crate) fn fit_platt(margins: &[f64], positive: &[bool]) -> Sigmoid {
    let n_pos = positive.iter().filter(|p| **p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(&t)
            .map(|(&m, &ti)| {
                let f = a * m + b;
                if f >= 0.0 {
                    ti * f + (1.0 + (-f).exp()).ln()
                } else {
                    (ti - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    const SIGMA: f64 = 1e-12;
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&m, &ti) in margins.iter().zip(&t) {
            let f = a * m + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += m * m * d2;
            h22 += d2;
            h21 += m * d2;
            let d1 = ti - p;
            g1 += m * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    Sigmoid { a, b }
}
