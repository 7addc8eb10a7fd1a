use ndarray::{Array2, ArrayView1, ArrayView2};

use super::HeadError;

/// Numerically stable softmax of one row of scores.
pub fn softmax(scores: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(scores: ArrayView1<'_, f64>) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Class-weighted softmax cross-entropy, averaged over the batch.
///
/// `loss = (1/N) * sum_i w[y_i] * -log softmax(logits_i)[y_i]` and the
/// gradient with respect to the logits is
/// `(w[y_i] / N) * (softmax(logits_i) - onehot(y_i))`.
pub fn weighted_ce_loss(logits: ArrayView2<'_, f64>, labels: &[usize], class_weights: &[f64]) -> Result<(f64, Array2<f64>), HeadError> {
    let (n, k) = logits.dim();
    if labels.len() != n {
        return Err(HeadError::LengthMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    if class_weights.len() != k {
        return Err(HeadError::InvalidConfig(format!(
            "{} class weights for {k} classes",
            class_weights.len()
        )));
    }
    let mut grad = Array2::zeros((n, k));
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(HeadError::LabelOutOfRange { label: y, classes: k });
        }
        let row = logits.row(i);
        let w = class_weights[y];
        loss += w * (log_sum_exp(row) - row[y]);
        for (j, p) in softmax(row).into_iter().enumerate() {
            let target = if j == y { 1.0 } else { 0.0 };
            grad[[i, j]] = w * inv_n * (p - target);
        }
    }
    Ok((loss * inv_n, grad))
}
