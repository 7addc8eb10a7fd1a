//! Hashed TF-IDF over word n-grams.
//!
//! Each n-gram (tokens joined by one space) is hashed with FNV-1a 64; the
//! column is `hash % dim` and bit 63 selects the sign. Document frequencies
//! are kept per full 64-bit hash, so the fitted state does not depend on
//! `dim`. `idf = ln((1 + N) / (1 + df)) + 1`, tf is the raw count, and rows
//! are L2-normalized.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backend, FeatureError, FeatureMatrix};
use crate::corpus::Record;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn word_ngrams(text: &str, (lo, hi): (usize, usize)) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    for n in lo..=hi {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

fn term_counts(text: &str, range: (usize, usize)) -> HashMap<u64, u32> {
    let mut counts = HashMap::new();
    for g in word_ngrams(text, range) {
        *counts.entry(fnv1a64(g.as_bytes())).or_insert(0) += 1;
    }
    counts
}

/// Fitted vectorizer state: corpus size and per-term document frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedTfidf {
    pub dim: usize,
    pub ngram_range: (usize, usize),
    pub n_docs: usize,
    pub df: BTreeMap<u64, u32>,
}

impl HashedTfidf {
    pub fn fit(records: &[Record], dim: usize, ngram_range: (usize, usize)) -> Result<Self, FeatureError> {
        if dim < 1024 || !dim.is_power_of_two() {
            return Err(FeatureError::BadDimension(dim));
        }
        let (lo, hi) = ngram_range;
        if !(1 <= lo && lo <= hi && hi <= 3) {
            return Err(FeatureError::BadNgramRange(lo, hi));
        }
        if records.is_empty() {
            return Err(FeatureError::NoRecords);
        }
        let mut df: BTreeMap<u64, u32> = BTreeMap::new();
        for r in records {
            let terms: HashSet<u64> = term_counts(&r.text, ngram_range).into_keys().collect();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        Ok(Self {
            dim,
            ngram_range,
            n_docs: records.len(),
            df,
        })
    }

    pub fn idf_of(&self, term_hash: u64) -> f64 {
        idf(self.n_docs, self.df.get(&term_hash).copied().unwrap_or(0) as usize)
    }

    fn vectorize(&self, text: &str) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        // sorted so the float accumulation order is fixed
        let mut terms: Vec<(u64, u32)> = term_counts(text, self.ngram_range).into_iter().collect();
        terms.sort_unstable();
        for (h, tf) in terms {
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            row[(h % self.dim as u64) as usize] += sign * f64::from(tf) * self.idf_of(h);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        row
    }

    pub fn transform(&self, records: &[Record]) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = records.par_iter().map(|r| self.vectorize(&r.text)).collect();
        let data = Array2::from_shape_vec((records.len(), self.dim), rows.concat()).expect("rows have dim columns");
        let ids = records.iter().map(|r| r.id.clone()).collect();
        FeatureMatrix::new(Backend::HashedTfidf, data, ids).expect("tf-idf values are finite")
    }
}

/// Fits on `records` and vectorizes the same records.
pub fn hashed_tfidf(records: &[Record], dim: usize, ngram_range: (usize, usize)) -> Result<FeatureMatrix, FeatureError> {
    Ok(HashedTfidf::fit(records, dim, ngram_range)?.transform(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use proptest::prelude::*;

    fn recs(texts: &[&str]) -> Vec<Record> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Record::new(format!("d{i}"), t, Language::En, None))
            .collect()
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn idf_values() {
        assert!((idf(2, 2) - 1.0).abs() < 1e-15);
        assert!((idf(2, 1) - 1.405_465_108_108_164_4).abs() < 1e-12);
    }

    fn column(term: &str, dim: usize) -> (usize, f64) {
        let h = fnv1a64(term.as_bytes());
        ((h % dim as u64) as usize, if h >> 63 == 1 { -1.0 } else { 1.0 })
    }

    #[test]
    fn two_document_idf_ratio() {
        let m = hashed_tfidf(&recs(&["a b", "a c"]), 1024, (1, 1)).unwrap();
        let (ca, sa) = column("a", 1024);
        let (cb, sb) = column("b", 1024);
        assert_ne!(ca, cb);
        let va = m.row(0)[ca] * sa;
        let vb = m.row(0)[cb] * sb;
        assert!(va > 0.0 && vb > 0.0);
        assert!((vb / va - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn one_document_uniform_magnitudes() {
        let m = hashed_tfidf(&recs(&["alpha beta gamma delta"]), 1024, (1, 1)).unwrap();
        let nonzero: Vec<f64> = m.row(0).iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
        assert_eq!(nonzero.len(), 4);
        for v in nonzero {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_rows() {
        let r = recs(&["hope wins today", "hope wins today", "rain again"]);
        let m = hashed_tfidf(&r, 2048, (1, 2)).unwrap();
        assert_eq!(m.row(0), m.row(1));
        let again = hashed_tfidf(&r, 2048, (1, 2)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn argument_checks() {
        let r = recs(&["x"]);
        assert!(matches!(hashed_tfidf(&r, 1000, (1, 1)), Err(FeatureError::BadDimension(1000))));
        assert!(matches!(hashed_tfidf(&r, 512, (1, 1)), Err(FeatureError::BadDimension(512))));
        assert!(matches!(hashed_tfidf(&r, 1024, (2, 1)), Err(FeatureError::BadNgramRange(2, 1))));
        assert!(matches!(hashed_tfidf(&r, 1024, (1, 4)), Err(FeatureError::BadNgramRange(1, 4))));
        assert!(matches!(hashed_tfidf(&[], 1024, (1, 1)), Err(FeatureError::NoRecords)));
    }

    proptest! {
        #[test]
        fn unit_norms_and_permutation(words in proptest::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,5}", 2..8), shift in 1usize..8) {
            let texts: Vec<&str> = words.iter().map(String::as_str).collect();
            let r = recs(&texts);
            let m = hashed_tfidf(&r, 1024, (1, 2)).unwrap();
            for i in 0..m.rows() {
                let n = m.row(i).dot(&m.row(i)).sqrt();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-6);
            }
            let mut permuted = r.clone();
            let len = permuted.len();
            permuted.rotate_left(shift % len);
            let p = hashed_tfidf(&permuted, 1024, (1, 2)).unwrap();
            for (j, rec) in permuted.iter().enumerate() {
                let i = r.iter().position(|x| x.id == rec.id).unwrap();
                prop_assert_eq!(p.row(j), m.row(i));
            }
        }
    }
}
