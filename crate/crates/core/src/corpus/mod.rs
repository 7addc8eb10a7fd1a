//! Labeled text corpora: record types, label schemas, loading and splitting.

mod normalize;
mod split;

pub use normalize::normalize_text;
pub use split::{largest_remainder, stratified_split, SplitPlan, SplitRatios};

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: unknown language {language:?}")]
    UnknownLanguage { line: usize, language: String },
    #[error("line {line}: empty id")]
    EmptyId { line: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
    #[error("record {0:?} has no label")]
    Unlabeled(String),
    #[error("invalid split ratios {0:?}: each must be >= 0 and they must sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("unknown corpus format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

/// Languages covered by the pipeline. `Unknown` marks records whose language
/// was neither given nor identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Ur,
    Es,
    De,
    Unknown,
}

impl Language {
    /// Known languages in canonical order; this order also breaks ties in
    /// language identification.
    pub const KNOWN: [Language; 4] = [Language::En, Language::Ur, Language::Es, Language::De];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ur => "ur",
            Language::Es => "es",
            Language::De => "de",
            Language::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "ur" => Ok(Language::Ur),
            "es" => Ok(Language::Es),
            "de" => Ok(Language::De),
            "unknown" => Ok(Language::Unknown),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Index of a label within its [`LabelSchema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    #[serde(alias = "multi")]
    Multiclass,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Task::Binary),
            "multi" | "multiclass" => Ok(Task::Multiclass),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Ordered label names. Index 0 is always `NotHope`; every other label is a
/// hope label. The index order is the row/column order of every matrix and
/// report downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub task: Task,
    pub labels: Vec<String>,
}

impl LabelSchema {
    pub fn binary() -> Self {
        Self {
            task: Task::Binary,
            labels: vec!["NotHope".into(), "Hope".into()],
        }
    }

    pub fn multiclass() -> Self {
        Self {
            task: Task::Multiclass,
            labels: vec![
                "NotHope".into(),
                "GeneralizedHope".into(),
                "RealisticHope".into(),
                "UnrealisticHope".into(),
            ],
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Binary => Self::binary(),
            Task::Multiclass => Self::multiclass(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().position(|l| l == name).map(LabelId)
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.labels[id.0]
    }

    pub fn is_hope(&self, id: LabelId) -> bool {
        id.0 != 0
    }

    /// 1.0 for `NotHope`, 1.5 for every hope label.
    pub fn default_class_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| if k == 0 { 1.0 } else { 1.5 })
            .collect()
    }
}

/// One text sample. `text` is stored normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl Record {
    pub fn new(id: impl Into<String>, text: &str, language: Language, label: Option<LabelId>) -> Self {
        Self {
            id: id.into(),
            text: normalize_text(text, language),
            language,
            label,
            split: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(CorpusFormat::Jsonl),
            Some("csv") => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.unwrap_or("").to_string())),
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// A row skipped during loading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub records: Vec<Record>,
    pub dropped: Vec<DroppedRow>,
}

/// How the label column is treated while loading.
#[derive(Debug, Clone, Copy)]
pub enum Labels<'a> {
    /// Label names are resolved against the schema; unknown names are errors.
    Schema(&'a LabelSchema),
    /// Labels are never read (prediction inputs).
    Ignore,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    id: String,
    text: String,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

/// Loads and validates a labeled corpus.
pub fn load_corpus(path: &Path, format: CorpusFormat, schema: &LabelSchema) -> Result<LoadedCorpus, CorpusError> {
    load_corpus_with(path, format, Labels::Schema(schema))
}

pub fn load_corpus_with(path: &Path, format: CorpusFormat, labels: Labels<'_>) -> Result<LoadedCorpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Jsonl => parse_jsonl(BufReader::new(file), labels),
        CorpusFormat::Csv => parse_csv(file, labels),
    }
}

pub fn parse_jsonl<R: BufRead>(reader: R, labels: Labels<'_>) -> Result<LoadedCorpus, CorpusError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RawRow = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push((line_no, row));
    }
    build_records(rows, labels)
}

pub fn parse_csv<R: Read>(reader: R, labels: Labels<'_>) -> Result<LoadedCorpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut rows = Vec::new();
    for result in rdr.deserialize::<RawRow>() {
        let row = result.map_err(|e| CorpusError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        // header is line 1
        rows.push((rows.len() + 2, row));
    }
    build_records(rows, labels)
}

fn build_records(rows: Vec<(usize, RawRow)>, labels: Labels<'_>) -> Result<LoadedCorpus, CorpusError> {
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(rows.len());
    let mut dropped = Vec::new();
    for (line, row) in rows {
        if row.id.is_empty() {
            return Err(CorpusError::EmptyId { line });
        }
        if !seen.insert(row.id.clone()) {
            return Err(CorpusError::DuplicateId(row.id));
        }
        let language = match row.language.as_deref().map(str::trim) {
            None | Some("") => Language::Unknown,
            Some(s) => s.parse().map_err(|_| CorpusError::UnknownLanguage {
                line,
                language: s.to_string(),
            })?,
        };
        let label = match (labels, row.label.as_deref().map(str::trim)) {
            (Labels::Schema(schema), Some(name)) if !name.is_empty() => {
                Some(schema.index_of(name).ok_or_else(|| CorpusError::UnknownLabel {
                    line,
                    label: name.to_string(),
                })?)
            }
            _ => None,
        };
        let text = normalize_text(&row.text, language);
        if text.is_empty() {
            dropped.push(DroppedRow {
                line,
                id: row.id,
                reason: "empty text after normalization".into(),
            });
            continue;
        }
        records.push(Record {
            id: row.id,
            text,
            language,
            label,
            split: None,
        });
    }
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(LoadedCorpus { records, dropped })
}
