//! Multiclass AdaBoost (SAMME) over axis-aligned decision stumps.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::{check_labels, HeadConfig, HeadError, HeadKind, HeadModel, LogEntry, Parameters};
use crate::corpus::LabelSchema;
use crate::features::FeatureMatrix;

/// Weighted errors at or below this count as a perfect stump.
const ZERO_ERROR: f64 = 1e-12;

/// `x[feature] <= threshold` predicts `left`, otherwise `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub alpha: f64,
}

impl Stump {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> usize {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

pub(crate) fn vote_shares(stumps: &[Stump], x: ArrayView1<'_, f64>, k: usize) -> Vec<f64> {
    let mut votes = vec![0.0; k];
    for s in stumps {
        votes[s.predict(x)] += s.alpha;
    }
    let total: f64 = votes.iter().sum();
    if total > 0.0 {
        votes.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

fn argmax_slice(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    (best, v[best])
}

struct Candidate {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    error: f64,
}

/// Exhaustive scan over features and midpoints between sorted distinct
/// values. The first candidate with the smallest weighted error wins.
fn best_stump(columns: &[Vec<f64>], orders: &[Vec<usize>], labels: &[usize], weights: &[f64], k: usize) -> Option<Candidate> {
    let mut total = vec![0.0; k];
    for (&y, &w) in labels.iter().zip(weights) {
        total[y] += w;
    }
    let total_mass: f64 = total.iter().sum();
    let mut best: Option<Candidate> = None;
    let mut left = vec![0.0; k];
    let mut right = vec![0.0; k];
    for (feature, order) in orders.iter().enumerate() {
        let col = &columns[feature];
        left.iter_mut().for_each(|v| *v = 0.0);
        for (pos, &i) in order.iter().enumerate() {
            left[labels[i]] += weights[i];
            let Some(&next) = order.get(pos + 1) else { break };
            if col[next] == col[i] {
                continue;
            }
            for c in 0..k {
                right[c] = total[c] - left[c];
            }
            let (lc, lm) = argmax_slice(&left);
            let (rc, rm) = argmax_slice(&right);
            let error = ((total_mass - lm - rm) / total_mass).max(0.0);
            if best.as_ref().is_none_or(|b| error < b.error) {
                best = Some(Candidate {
                    feature,
                    threshold: 0.5 * (col[i] + col[next]),
                    left: lc,
                    right: rc,
                    error,
                });
            }
        }
    }
    best
}

/// SAMME boosting for at most `rounds` rounds.
///
/// Stops early when a stump is perfect (kept with a capped vote) or no
/// better than chance, `err >= 1 - 1/K` (discarded). The search itself is
/// deterministic; `seed` is recorded for provenance.
pub fn train_adaboost(x: &FeatureMatrix, labels: &[usize], schema: &LabelSchema, rounds: usize, seed: u64) -> Result<HeadModel, HeadError> {
    if rounds == 0 {
        return Err(HeadError::ZeroRounds);
    }
    let k = schema.len();
    if check_labels(x, labels, k)? < 2 {
        return Err(HeadError::TooFewClasses);
    }
    let n = x.rows();
    let d = x.dim();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.data().column(j).to_vec()).collect();
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let chance_error = 1.0 - 1.0 / k as f64;
    let class_term = ((k - 1) as f64).ln();
    let max_alpha = 1e12f64.ln() + class_term;
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut log = Vec::new();

    for round in 0..rounds {
        let Some(c) = best_stump(&columns, &orders, labels, &weights, k) else { break };
        log.push(LogEntry {
            step: round,
            metric: "weighted_error".into(),
            value: c.error,
        });
        if c.error >= chance_error {
            break;
        }
        let perfect = c.error <= ZERO_ERROR;
        let alpha = if perfect {
            max_alpha
        } else {
            ((1.0 - c.error) / c.error).ln() + class_term
        };
        let stump = Stump {
            feature: c.feature,
            threshold: c.threshold,
            left: c.left,
            right: c.right,
            alpha,
        };
        if perfect {
            stumps.push(stump);
            break;
        }
        for i in 0..n {
            if stump.predict(x.row(i)) != labels[i] {
                weights[i] *= alpha.exp();
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        stumps.push(stump);
    }

    Ok(HeadModel {
        kind: HeadKind::Adaboost,
        schema: schema.clone(),
        feature_dim: d,
        parameters: Parameters::Adaboost { stumps },
        train_config: HeadConfig::Adaboost { rounds, seed },
        training_log: log,
        threshold: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::predict_proba;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn accuracy(m: &HeadModel, x: &FeatureMatrix, y: &[usize]) -> f64 {
        let p = m.predict(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_single_feature_stops_after_one_stump() {
        let x = FeatureMatrix::from_rows(&[vec![0.1], vec![0.2], vec![0.3], vec![0.7], vec![0.8], vec![0.9]]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let m = train_adaboost(&x, &y, &LabelSchema::binary(), 50, 0).unwrap();
        let Parameters::Adaboost { stumps } = &m.parameters else { unreachable!() };
        assert_eq!(stumps.len(), 1);
        assert!((stumps[0].threshold - 0.5).abs() < 1e-12);
        assert!((stumps[0].alpha - 1e12f64.ln()).abs() < 1e-9);
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn kept_rounds_beat_chance() {
        let mut rng = stream_rng(3, 0);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + 0.3 * r[1] > 0.6) * 2 + usize::from(r[1] > 0.5)).collect();
        let m = train_adaboost(&FeatureMatrix::from_rows(&rows).unwrap(), &y, &LabelSchema::multiclass(), 30, 0).unwrap();
        let Parameters::Adaboost { stumps } = &m.parameters else { unreachable!() };
        let kept = stumps.len();
        for entry in &m.training_log[..kept] {
            assert!(entry.value < 1.0 - 1.0 / 4.0);
        }
        for s in stumps {
            assert!(s.alpha.is_finite() && s.alpha > 0.0);
        }
    }

    #[test]
    fn random_labels_stay_near_chance_out_of_sample() {
        // labels independent of features: held-out accuracy averages ~0.5
        let mut accs = Vec::new();
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<usize>) {
                let rows = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
                let y = (0..n).map(|_| rng.gen_range(0..2)).collect();
                (rows, y)
            };
            let (train_x, train_y) = draw(100);
            let (test_x, test_y) = draw(200);
            let m = train_adaboost(&FeatureMatrix::from_rows(&train_x).unwrap(), &train_y, &LabelSchema::binary(), 50, seed).unwrap();
            accs.push(accuracy(&m, &FeatureMatrix::from_rows(&test_x).unwrap(), &test_y));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        // sd of a 200-sample accuracy is ~0.035; of the 20-seed mean ~0.008
        assert!((mean - 0.5).abs() < 0.05, "mean held-out accuracy {mean}");
    }

    #[test]
    fn probabilities_are_vote_shares() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let m = train_adaboost(&x, &y, &LabelSchema::binary(), 5, 0).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        for r in p.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn argument_errors() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(train_adaboost(&x, &[0, 1], &LabelSchema::binary(), 0, 0).unwrap_err(), HeadError::ZeroRounds);
        assert_eq!(train_adaboost(&x, &[1, 1], &LabelSchema::binary(), 3, 0).unwrap_err(), HeadError::TooFewClasses);
    }

    #[test]
    fn constant_features_give_uniform_model() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let m = train_adaboost(&x, &[0, 1, 1], &LabelSchema::binary(), 3, 0).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        assert!(p.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }
}
