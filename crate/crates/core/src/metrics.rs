//! Confusion matrices and precision / recall / F1 reports.
//!
//! Rows are true classes, columns predicted classes, both in schema order.
//! Any quantity with a zero denominator is 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    /// `counts[true][predicted]`
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        Self {
            classes: counts.len(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn column_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.counts[k][k]).sum()
    }

    /// CSV with a header row of predicted labels and one row per true label.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("true\\pred");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= classes {
                return Err(MetricsError::LabelOutOfRange { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    /// Classes with no true instances (they still count in macro means).
    pub zero_support: Vec<usize>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let n = cm.total();
    if n == 0 || cm.classes == 0 {
        return Err(MetricsError::Empty);
    }
    let per_class: Vec<ClassMetrics> = (0..cm.classes)
        .map(|k| {
            let tp = cm.counts[k][k];
            let precision = ratio(tp, cm.column_sum(k));
            let recall = ratio(tp, cm.row_sum(k));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: cm.row_sum(k),
            }
        })
        .collect();
    let k = cm.classes as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), n),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_f1: per_class.iter().map(|c| c.support as f64 * c.f1).sum::<f64>() / n as f64,
        zero_support: per_class
            .iter()
            .enumerate()
            .filter(|(_, c)| c.support == 0)
            .map(|(i, _)| i)
            .collect(),
        per_class,
    })
}

/// Convenience: confusion + report.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<(ConfusionMatrix, MetricsReport), MetricsError> {
    let cm = confusion(y_true, y_pred, classes)?;
    let r = report(&cm)?;
    Ok((cm, r))
}

impl MetricsReport {
    /// Aligned plain-text table.
    pub fn to_table(&self, labels: &[String]) -> String {
        let width = labels.iter().map(String::len).chain(["weighted avg".len()]).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}", "", "precision", "recall", "f1", "support");
        for (l, c) in labels.iter().zip(&self.per_class) {
            let _ = writeln!(
                out,
                "{l:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                c.precision, c.recall, c.f1, c.support
            );
        }
        let n: u64 = self.per_class.iter().map(|c| c.support).sum();
        out.push('\n');
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9.4}  {:>7}", "accuracy", "", "", self.accuracy, n);
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
            "macro avg", self.macro_precision, self.macro_recall, self.macro_f1, n
        );
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9.4}  {:>7}", "weighted avg", "", "", self.weighted_f1, n);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_matrix() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_prediction_is_diagonal() {
        let y = [0, 1, 2, 2, 1, 3];
        let cm = confusion(&y, &y, 4).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0, 0], vec![0, 2, 0, 0], vec![0, 0, 2, 0], vec![0, 0, 0, 1]]);
        let r = report(&cm).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.weighted_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_input() {
        let cm = confusion(&[], &[], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(report(&cm), Err(MetricsError::Empty));
    }

    #[test]
    fn worked_binary_example() {
        let cm = ConfusionMatrix::from_counts(vec![vec![50, 10], vec![5, 35]]);
        let r = report(&cm).unwrap();
        assert!((r.accuracy - 0.85).abs() < 1e-12);
        let hope = &r.per_class[1];
        assert!((hope.precision - 35.0 / 45.0).abs() < 1e-12);
        assert!((hope.recall - 0.875).abs() < 1e-12);
        assert!((hope.f1 - 0.8235).abs() < 1e-4);
        assert!((r.per_class[0].f1 - 0.8696).abs() < 1e-4);
        assert!((r.macro_f1 - 0.8466).abs() < 1e-4);
        assert!((r.weighted_f1 - 0.8512).abs() < 1e-4);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let r = report(&confusion(&[0, 1, 0], &[0, 1, 1], 3).unwrap()).unwrap();
        assert_eq!(r.per_class[2], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
        assert_eq!(r.zero_support, vec![2]);
        let mean2 = (r.per_class[0].f1 + r.per_class[1].f1) / 3.0;
        assert!((r.macro_f1 - mean2).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[0], &[2], 2), Err(MetricsError::LabelOutOfRange { label: 2, classes: 2 })));
    }

    #[test]
    fn csv_and_table() {
        let labels = vec!["NotHope".to_string(), "Hope".to_string()];
        let cm = ConfusionMatrix::from_counts(vec![vec![50, 10], vec![5, 35]]);
        assert_eq!(cm.to_csv(&labels), "true\\pred,NotHope,Hope\nNotHope,50,10\nHope,5,35\n");
        let t = report(&cm).unwrap().to_table(&labels);
        assert!(t.contains("macro avg"));
        assert!(t.lines().next().unwrap().contains("precision"));
    }
}
