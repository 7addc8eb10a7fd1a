//! Dense per-record feature matrices.
//!
//! Features come either from encoder embeddings exported to `GHEM` files
//! ([`ghem`]) or from the in-core hashed TF-IDF vectorizer ([`tfidf`]).
//! Several sources can be joined column-wise with [`concat_features`].

pub mod ghem;
pub mod tfidf;

use std::collections::HashMap;
use std::ops::Range;

use ndarray::{s, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ghem::{corpus_digest, read_embedding_file, write_embedding_file, GhemHeader};
pub use tfidf::{hashed_tfidf, HashedTfidf};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?} (expected \"GHEM\")")]
    BadMagic([u8; 4]),
    #[error("unsupported GHEM version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported GHEM flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("encoder name is not valid UTF-8")]
    BadEncoderName,
    #[error("encoder name is {0} bytes; at most 65535 allowed")]
    EncoderNameTooLong(usize),
    #[error("file has {found} rows but {expected} record ids were expected")]
    RowCountMismatch { found: usize, expected: usize },
    #[error("corpus digest mismatch: file {found}, expected {expected}")]
    DigestMismatch { found: String, expected: String },
    #[error("payload is {found} bytes; header implies {expected}")]
    PayloadLength { found: usize, expected: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix shape {rows}x{dim} does not match {len} values")]
    Shape { rows: usize, dim: usize, len: usize },
    #[error("{0} row ids for {1} rows")]
    RowIdCount(usize, usize),
    #[error("row ids of part {0} differ from part 0")]
    RowIdMismatch(usize),
    #[error("no feature parts to concatenate")]
    NoParts,
    #[error("no records to vectorize")]
    NoRecords,
    #[error("dimension {0} must be a power of two and at least 1024")]
    BadDimension(usize),
    #[error("word n-gram range ({0}, {1}) must satisfy 1 <= lo <= hi <= 3")]
    BadNgramRange(usize, usize),
    #[error("unknown record id {0:?}")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Embedding,
    HashedTfidf,
    Concat,
}

/// Row-per-record real matrix with the record ids of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    backend: Backend,
    data: Array2<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(backend: Backend, data: Array2<f64>, row_ids: Vec<String>) -> Result<Self, FeatureError> {
        if row_ids.len() != data.nrows() {
            return Err(FeatureError::RowIdCount(row_ids.len(), data.nrows()));
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row, col });
        }
        Ok(Self { backend, data, row_ids })
    }

    /// Matrix without record ids (synthetic data); rows are named by index.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let dim = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(FeatureError::Shape {
                rows: rows.len(),
                dim,
                len: flat.len(),
            });
        }
        let data = Array2::from_shape_vec((rows.len(), dim), flat).expect("shape checked");
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(Backend::Embedding, data, ids)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Rows for `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Self, FeatureError> {
        let index: HashMap<&str, usize> = self.row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| FeatureError::UnknownId(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            backend: self.backend,
            data: self.data.select(Axis(0), &rows),
            row_ids: ids.to_vec(),
        })
    }

    pub fn columns(&self, range: Range<usize>) -> Self {
        Self {
            backend: self.backend,
            data: self.data.slice(s![.., range]).to_owned(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Scales every nonzero row to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self) {
        for mut row in self.data.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            backend: self.backend,
            data: &self.data * factor,
            row_ids: self.row_ids.clone(),
        }
    }
}

/// Horizontal concatenation of row-aligned parts, in part order.
pub fn concat_features(parts: &[FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
    let first = parts.first().ok_or(FeatureError::NoParts)?;
    if parts.len() == 1 {
        return Ok(first.clone());
    }
    for (i, p) in parts.iter().enumerate().skip(1) {
        if p.row_ids != first.row_ids {
            return Err(FeatureError::RowIdMismatch(i));
        }
    }
    let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
    let data = ndarray::concatenate(Axis(1), &views).expect("row counts match");
    Ok(FeatureMatrix {
        backend: Backend::Concat,
        data,
        row_ids: first.row_ids.clone(),
    })
}

/// Keeps the first `max_tokens` whitespace-delimited tokens.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let max_tokens = max_tokens.max(1);
    text.split_whitespace().take(max_tokens).collect::<Vec<_>>().join(" ")
}

pub const DEFAULT_MAX_TOKENS: usize = 128;
