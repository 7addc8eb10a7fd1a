//! Binary decision-threshold calibration.
//!
//! The hope probability is compared against every point of a fixed grid
//! (0.30 to 0.80 in steps of 0.01 by default); the threshold with the best
//! binary macro-F1 wins, the lowest threshold on ties. Hope is predicted iff
//! `p >= t`, here and in [`apply_threshold`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{confusion, report};

pub const DEFAULT_LO: f64 = 0.3;
pub const DEFAULT_HI: f64 = 0.8;
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrateError {
    #[error("{proba} probabilities but {labels} labels")]
    LengthMismatch { proba: usize, labels: usize },
    #[error("probability {0} at index {1} is outside [0, 1]")]
    InvalidProbability(f64, usize),
    #[error("label {0} is not binary")]
    NonBinaryLabel(usize),
    #[error("validation labels contain a single class; macro-F1 is undefined")]
    SingleClass,
    #[error("invalid grid: lo {lo}, hi {hi}, step {step}")]
    InvalidGrid { lo: f64, hi: f64, step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MacroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub threshold: f64,
    pub grid_step: f64,
    pub objective: Objective,
    pub objective_value: f64,
}

/// Grid points from `lo` to `hi` inclusive.
///
/// When `1/step` is an integer `m` the points are computed as `i / m`, which
/// gives the nearest doubles to 0.30, 0.31, ... rather than accumulated sums.
pub fn threshold_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CalibrateError> {
    let invalid = CalibrateError::InvalidGrid { lo, hi, step };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || lo > hi || lo < 0.0 || hi > 1.0 {
        return Err(invalid);
    }
    let inv = 1.0 / step;
    if (inv - inv.round()).abs() < 1e-9 {
        let m = inv.round();
        let first = (lo * m).round() as i64;
        let last = (hi * m).round() as i64;
        Ok((first..=last).map(|i| i as f64 / m).collect())
    } else {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| lo + i as f64 * step).collect())
    }
}

pub fn apply_threshold(proba_hope: &[f64], threshold: f64) -> Vec<usize> {
    proba_hope.iter().map(|&p| usize::from(p >= threshold)).collect()
}

fn binary_macro_f1(y_true: &[usize], y_pred: &[usize]) -> f64 {
    let cm = confusion(y_true, y_pred, 2).expect("binary labels checked");
    report(&cm).expect("non-empty").macro_f1
}

/// Exhaustive grid sweep maximizing binary macro-F1 on validation data.
pub fn sweep_threshold(proba_hope: &[f64], y_true: &[usize], lo: f64, hi: f64, step: f64) -> Result<ThresholdConfig, CalibrateError> {
    if proba_hope.len() != y_true.len() {
        return Err(CalibrateError::LengthMismatch {
            proba: proba_hope.len(),
            labels: y_true.len(),
        });
    }
    for (i, &p) in proba_hope.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(CalibrateError::InvalidProbability(p, i));
        }
    }
    if let Some(&bad) = y_true.iter().find(|&&y| y > 1) {
        return Err(CalibrateError::NonBinaryLabel(bad));
    }
    if !(y_true.contains(&0) && y_true.contains(&1)) {
        return Err(CalibrateError::SingleClass);
    }
    let grid = threshold_grid(lo, hi, step)?;
    let mut best: Option<(f64, f64)> = None;
    for t in grid {
        let score = binary_macro_f1(y_true, &apply_threshold(proba_hope, t));
        // strict > keeps the lowest threshold among ties
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((t, score));
        }
    }
    let (threshold, objective_value) = best.expect("grid is non-empty");
    Ok(ThresholdConfig {
        threshold,
        grid_step: step,
        objective: Objective::MacroF1,
        objective_value,
    })
}

/// Sweep with the default grid.
pub fn sweep_default(proba_hope: &[f64], y_true: &[usize]) -> Result<ThresholdConfig, CalibrateError> {
    sweep_threshold(proba_hope, y_true, DEFAULT_LO, DEFAULT_HI, DEFAULT_STEP)
}
