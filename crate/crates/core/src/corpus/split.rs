use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabelId, Record, Split};
use crate::rng::stream_rng;

/// Train/val/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SplitRatios([f64; 3]);

impl SplitRatios {
    pub fn new(ratios: [f64; 3]) -> Result<Self, CorpusError> {
        let valid = ratios.iter().all(|r| r.is_finite() && *r >= 0.0)
            && (ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if valid {
            Ok(Self(ratios))
        } else {
            Err(CorpusError::InvalidRatios(ratios))
        }
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self([0.70, 0.15, 0.15])
    }
}

impl TryFrom<[f64; 3]> for SplitRatios {
    type Error = CorpusError;

    fn try_from(value: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<SplitRatios> for [f64; 3] {
    fn from(value: SplitRatios) -> Self {
        value.0
    }
}

/// Fixed-point scale for ideal shares: ratios with up to nine decimals are
/// apportioned exactly, and equal fractional parts compare equal.
const SCALE: u128 = 1_000_000_000;

/// Largest-remainder apportionment of `total` units over three buckets.
///
/// Each bucket gets the floor of `total * ratio`; leftover units go one at a
/// time to the largest fractional parts, ties in bucket order.
pub fn largest_remainder(total: usize, ratios: SplitRatios) -> [usize; 3] {
    let scaled: Vec<u128> = ratios
        .0
        .iter()
        .map(|r| (total as f64 * r * SCALE as f64).round() as u128)
        .collect();
    let mut counts = [0usize; 3];
    let mut remainders = [0u128; 3];
    for i in 0..3 {
        counts[i] = (scaled[i] / SCALE) as usize;
        remainders[i] = scaled[i] % SCALE;
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable sort keeps train -> val -> test on ties
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    let leftover = total.saturating_sub(assigned);
    for &bucket in order.iter().take(leftover) {
        counts[bucket] += 1;
    }
    counts
}

/// Deterministic per-class assignment of record ids to splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub ratios: SplitRatios,
    pub seed: u64,
    pub assignment: BTreeMap<String, Split>,
    /// Classes with fewer than three records; placed wholly in train.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_classes: Vec<LabelId>,
}

impl SplitPlan {
    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.assignment.get(id).copied()
    }

    /// Writes each record's split field from the plan.
    pub fn apply(&self, records: &mut [Record]) {
        for r in records {
            r.split = self.split_of(&r.id);
        }
    }

    /// `counts[class][split]` over the labeled records in the plan.
    pub fn class_counts(&self, records: &[Record], n_classes: usize) -> Vec<[usize; 3]> {
        let mut counts = vec![[0usize; 3]; n_classes];
        for r in records {
            if let (Some(label), Some(split)) = (r.label, self.split_of(&r.id)) {
                counts[label.0][split.index()] += 1;
            }
        }
        counts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split plan serializes")
    }
}

/// Stratified split with largest-remainder counts per class.
///
/// Within a class, record ids are sorted and then shuffled by a generator
/// keyed on `(seed, class index)`, so the result depends only on the set of
/// records, not their order. The first shuffled ids go to train, then val,
/// then test.
pub fn stratified_split(records: &[Record], ratios: SplitRatios, seed: u64) -> Result<SplitPlan, CorpusError> {
    let mut by_class: BTreeMap<LabelId, Vec<&str>> = BTreeMap::new();
    for r in records {
        let label = r.label.ok_or_else(|| CorpusError::Unlabeled(r.id.clone()))?;
        by_class.entry(label).or_default().push(&r.id);
    }

    let mut assignment = BTreeMap::new();
    let mut degenerate_classes = Vec::new();
    for (label, mut ids) in by_class {
        ids.sort_unstable();
        if ids.len() < Split::ALL.len() {
            warn!("class {} has {} records; assigning all to train", label.0, ids.len());
            degenerate_classes.push(label);
            for id in ids {
                assignment.insert(id.to_string(), Split::Train);
            }
            continue;
        }
        ids.shuffle(&mut stream_rng(seed, label.0 as u64));
        let counts = largest_remainder(ids.len(), ratios);
        let mut it = ids.into_iter();
        for (split, n) in Split::ALL.into_iter().zip(counts) {
            for id in it.by_ref().take(n) {
                assignment.insert(id.to_string(), split);
            }
        }
    }

    Ok(SplitPlan {
        ratios,
        seed,
        assignment,
        degenerate_classes,
    })
}
