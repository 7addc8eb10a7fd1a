//! `GHEM` embedding files.
//!
//! Layout, little-endian throughout:
//!
//! | field         | type                                  |
//! |---------------|---------------------------------------|
//! | magic         | `b"GHEM"`                             |
//! | version       | u16, always 1                         |
//! | flags         | u16, always 0                         |
//! | rows          | u32                                   |
//! | dim           | u32                                   |
//! | encoder_name  | u16 byte length + UTF-8 bytes         |
//! | corpus_digest | 8 bytes                               |
//! | payload       | `rows * dim` f32, row-major           |
//!
//! The digest is the first 8 bytes of SHA-256 over the record ids joined by
//! `\n`, which ties a file to one corpus in one order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{Backend, FeatureError, FeatureMatrix};

pub const MAGIC: [u8; 4] = *b"GHEM";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhemHeader {
    pub version: u16,
    pub flags: u16,
    pub rows: u32,
    pub dim: u32,
    pub encoder_name: String,
    pub corpus_digest: [u8; 8],
}

pub fn corpus_digest<S: AsRef<str>>(ids: &[S]) -> [u8; 8] {
    let mut hasher = Sha256::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(id.as_ref().as_bytes());
    }
    let full = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&full[..8]);
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes a row-major f32 matrix for the given ordered ids.
pub fn encode<S: AsRef<str>>(values: &[f32], dim: usize, encoder_name: &str, ids: &[S]) -> Result<Vec<u8>, FeatureError> {
    let rows = ids.len();
    if values.len() != rows * dim {
        return Err(FeatureError::Shape { rows, dim, len: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite { row: i / dim.max(1), col: i % dim.max(1) });
    }
    let name = encoder_name.as_bytes();
    if name.len() > u16::MAX as usize {
        return Err(FeatureError::EncoderNameTooLong(name.len()));
    }
    let mut out = Vec::with_capacity(24 + name.len() + values.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&corpus_digest(ids));
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(FeatureError::TruncatedHeader)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, FeatureError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses the header; returns it with the payload offset.
pub fn decode_header(bytes: &[u8]) -> Result<(GhemHeader, usize), FeatureError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FeatureError::BadMagic(magic));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let flags = cur.u16()?;
    if flags != 0 {
        return Err(FeatureError::UnsupportedFlags(flags));
    }
    let rows = cur.u32()?;
    let dim = cur.u32()?;
    let name_len = cur.u16()? as usize;
    let encoder_name = std::str::from_utf8(cur.take(name_len)?)
        .map_err(|_| FeatureError::BadEncoderName)?
        .to_string();
    let corpus_digest: [u8; 8] = cur.take(8)?.try_into().unwrap();
    Ok((
        GhemHeader {
            version,
            flags,
            rows,
            dim,
            encoder_name,
            corpus_digest,
        },
        cur.pos,
    ))
}

/// Decodes a file image and checks it against the expected ordered ids.
pub fn decode(bytes: &[u8], expected_ids: &[String]) -> Result<(GhemHeader, FeatureMatrix), FeatureError> {
    let (header, offset) = decode_header(bytes)?;
    let rows = header.rows as usize;
    let dim = header.dim as usize;
    if rows != expected_ids.len() {
        return Err(FeatureError::RowCountMismatch {
            found: rows,
            expected: expected_ids.len(),
        });
    }
    let expected_digest = corpus_digest(expected_ids);
    if header.corpus_digest != expected_digest {
        return Err(FeatureError::DigestMismatch {
            found: hex(&header.corpus_digest),
            expected: hex(&expected_digest),
        });
    }
    let payload = &bytes[offset..];
    let expected_len = rows * dim * 4;
    if payload.len() != expected_len {
        return Err(FeatureError::PayloadLength {
            found: payload.len(),
            expected: expected_len,
        });
    }
    let mut values = Vec::with_capacity(rows * dim);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FeatureError::NonFinite { row: i / dim, col: i % dim });
        }
        values.push(f64::from(v));
    }
    let data = Array2::from_shape_vec((rows, dim), values).expect("length checked");
    let matrix = FeatureMatrix::new(Backend::Embedding, data, expected_ids.to_vec())?;
    Ok((header, matrix))
}

pub fn read_embedding_file(path: &Path, expected_ids: &[String]) -> Result<FeatureMatrix, FeatureError> {
    read_embedding_file_with_header(path, expected_ids).map(|(_, m)| m)
}

pub fn read_embedding_file_with_header(path: &Path, expected_ids: &[String]) -> Result<(GhemHeader, FeatureMatrix), FeatureError> {
    let bytes = fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes, expected_ids)
}

/// Writes `matrix` (rounded to f32) with its own row ids.
pub fn write_embedding_file(path: &Path, matrix: &FeatureMatrix, encoder_name: &str) -> Result<(), FeatureError> {
    let values: Vec<f32> = matrix.data().iter().map(|&v| v as f32).collect();
    let bytes = encode(&values, matrix.dim(), encoder_name, matrix.row_ids())?;
    fs::write(path, bytes).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}
