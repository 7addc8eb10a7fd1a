//! Gradient-boosted regression trees on the multiclass logistic loss.
//!
//! Each round fits one tree per class to the residuals `y_k - p_k`, using
//! exact greedy variance-reduction splits. Leaf values are the one-step
//! Newton estimate `sum(residual) / sum(p * (1 - p))`; initial scores are log
//! class priors.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::{check_labels, softmax, HeadConfig, HeadError, HeadKind, HeadModel, LogEntry, Parameters};
use crate::corpus::LabelSchema;
use crate::features::FeatureMatrix;

const HESSIAN_FLOOR: f64 = 1e-12;
const PRIOR_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            min_leaf: 1,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub init_scores: Vec<f64>,
    pub learning_rate: f64,
    /// `trees[class][round]`
    pub trees: Vec<Vec<Tree>>,
}

impl GbdtParams {
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.init_scores
            .iter()
            .zip(&self.trees)
            .map(|(init, trees)| init + self.learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>())
            .collect()
    }
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    orders: &'a [Vec<usize>],
    active: &'a [usize],
    residual: Vec<f64>,
    hessian: Vec<f64>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let g: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hessian[i]).sum();
        g / h.max(HESSIAN_FLOOR)
    }

    /// Best (gain, feature, threshold) for rows flagged in `member`.
    fn best_split(&self, member: &[bool], n: usize) -> Option<(f64, usize, f64)> {
        let total: f64 = (0..member.len()).filter(|&i| member[i]).map(|i| self.residual[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in self.active {
            let col = &self.columns[feature];
            let mut left_sum = 0.0;
            let mut left_n = 0usize;
            let mut prev: Option<usize> = None;
            for &i in &self.orders[feature] {
                if !member[i] {
                    continue;
                }
                if let Some(p) = prev {
                    if col[i] != col[p] && left_n >= self.min_leaf && n - left_n >= self.min_leaf {
                        let right_sum = total - left_sum;
                        let gain = left_sum * left_sum / left_n as f64
                            + right_sum * right_sum / (n - left_n) as f64
                            - base;
                        if gain > MIN_GAIN && best.is_none_or(|b| gain > b.0) {
                            best = Some((gain, feature, 0.5 * (col[p] + col[i])));
                        }
                    }
                }
                left_sum += self.residual[i];
                left_n += 1;
                prev = Some(i);
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, n_total: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&rows),
        });
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf.max(1) {
            return id;
        }
        let mut member = vec![false; n_total];
        for &i in &rows {
            member[i] = true;
        }
        let Some((_, feature, threshold)) = self.best_split(&member, rows.len()) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.columns[feature][i] <= threshold);
        let left = self.build(left_rows, depth + 1, n_total);
        let right = self.build(right_rows, depth + 1, n_total);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

pub fn train_gbdt(x: &FeatureMatrix, labels: &[usize], schema: &LabelSchema, config: &GbdtConfig) -> Result<HeadModel, HeadError> {
    if config.rounds == 0 {
        return Err(HeadError::ZeroRounds);
    }
    if config.max_depth == 0 {
        return Err(HeadError::InvalidConfig("max_depth must be at least 1".into()));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(HeadError::InvalidConfig(format!("learning_rate {}", config.learning_rate)));
    }
    let k = schema.len();
    check_labels(x, labels, k)?;
    let n = x.rows();
    let d = x.dim();

    let mut counts = vec![0usize; k];
    for &y in labels {
        counts[y] += 1;
    }
    let init_scores: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();

    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.data().column(j).to_vec()).collect();
    // features constant over the training rows can never split
    let active: Vec<usize> = (0..d)
        .filter(|&j| columns[j].iter().any(|&v| v != columns[j][0]))
        .collect();
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            if !active.contains(&j) {
                return Vec::new();
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut scores: Vec<Vec<f64>> = vec![init_scores.clone(); n];
    let mut trees: Vec<Vec<Tree>> = vec![Vec::with_capacity(config.rounds); k];
    let mut log = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(ArrayView1::from(s))).collect();
        let loss = -probs
            .iter()
            .zip(labels)
            .map(|(p, &y)| p[y].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n as f64;
        log.push(LogEntry {
            step: round,
            metric: "train_loss".into(),
            value: loss,
        });
        for (class, class_trees) in trees.iter_mut().enumerate() {
            let residual: Vec<f64> = probs
                .iter()
                .zip(labels)
                .map(|(p, &y)| f64::from(u8::from(y == class)) - p[class])
                .collect();
            let hessian: Vec<f64> = probs.iter().map(|p| p[class] * (1.0 - p[class])).collect();
            let mut builder = TreeBuilder {
                columns: &columns,
                orders: &orders,
                active: &active,
                residual,
                hessian,
                max_depth: config.max_depth,
                min_leaf: config.min_leaf.max(1),
                nodes: Vec::new(),
            };
            builder.build((0..n).collect(), 0, n);
            let tree = Tree { nodes: builder.nodes };
            for (i, s) in scores.iter_mut().enumerate() {
                s[class] += config.learning_rate * tree.predict(x.row(i));
            }
            class_trees.push(tree);
        }
    }

    Ok(HeadModel {
        kind: HeadKind::Gbdt,
        schema: schema.clone(),
        feature_dim: d,
        parameters: Parameters::Gbdt(GbdtParams {
            init_scores,
            learning_rate: config.learning_rate,
            trees,
        }),
        train_config: HeadConfig::Gbdt(config.clone()),
        training_log: log,
        threshold: None,
    })
}
