//! Exploratory reports: label distribution, length statistics, and token
//! frequencies per class.
//!
//! Words are whitespace-delimited tokens of the normalized text for every
//! language, Urdu included; reports carry an `approximate_word_count` flag
//! when Urdu text is present.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelSchema, Language, Record};

#[derive(Debug, Error, PartialEq)]
pub enum EdaError {
    #[error("record {0} has no label")]
    Unlabeled(String),
    #[error("record {id} has label index {label} outside the schema")]
    LabelOutOfRange { id: String, label: usize },
    #[error("top-k requires k >= 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopwordPolicy {
    None,
    PerLanguageList,
}

/// Bundled stopword list for a language; empty for `Unknown`.
pub fn stopwords(language: Language) -> &'static str {
    match language {
        Language::En => include_str!("../data/stopwords/en.txt"),
        Language::Ur => include_str!("../data/stopwords/ur.txt"),
        Language::Es => include_str!("../data/stopwords/es.txt"),
        Language::De => include_str!("../data/stopwords/de.txt"),
        Language::Unknown => "",
    }
}

fn stopword_set(language: Language) -> BTreeSet<&'static str> {
    stopwords(language).lines().map(str::trim).filter(|w| !w.is_empty()).collect()
}

fn label_of(r: &Record, k: usize) -> Result<usize, EdaError> {
    let label = r.label.ok_or_else(|| EdaError::Unlabeled(r.id.clone()))?.0;
    if label >= k {
        return Err(EdaError::LabelOutOfRange { id: r.id.clone(), label });
    }
    Ok(label)
}

/// Count per schema label, in schema order; empty classes are present with 0.
pub fn class_distribution(records: &[Record], schema: &LabelSchema) -> Result<Vec<(String, usize)>, EdaError> {
    let mut counts = vec![0usize; schema.len()];
    for r in records {
        counts[label_of(r, schema.len())?] += 1;
    }
    Ok(schema.labels.iter().cloned().zip(counts).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub label: String,
    pub count: usize,
    /// `None` when the class is empty.
    pub mean_char_length: Option<f64>,
    pub mean_word_count: Option<f64>,
    pub empty: bool,
}

pub fn char_length(text: &str) -> usize {
    text.chars().count()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn length_stats(records: &[Record], schema: &LabelSchema) -> Result<Vec<LengthStats>, EdaError> {
    let k = schema.len();
    let mut sums = vec![(0usize, 0usize, 0usize); k];
    for r in records {
        let s = &mut sums[label_of(r, k)?];
        s.0 += 1;
        s.1 += char_length(&r.text);
        s.2 += word_count(&r.text);
    }
    Ok(schema
        .labels
        .iter()
        .zip(sums)
        .map(|(label, (n, chars, words))| LengthStats {
            label: label.clone(),
            count: n,
            mean_char_length: (n > 0).then(|| chars as f64 / n as f64),
            mean_word_count: (n > 0).then(|| words as f64 / n as f64),
            empty: n == 0,
        })
        .collect())
}

/// Sort by descending count, then lexicographically, and keep `k`.
fn rank(counts: HashMap<&str, usize>, k: usize) -> Vec<(String, usize)> {
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().take(k).map(|(t, c)| (t.to_string(), c)).collect()
}

/// Top `k` tokens per schema label.
pub fn top_tokens(records: &[Record], schema: &LabelSchema, k: usize, policy: StopwordPolicy) -> Result<Vec<Vec<(String, usize)>>, EdaError> {
    if k == 0 {
        return Err(EdaError::ZeroK);
    }
    let mut stop: BTreeMap<Language, BTreeSet<&'static str>> = BTreeMap::new();
    let mut per_class: Vec<HashMap<&str, usize>> = vec![HashMap::new(); schema.len()];
    for r in records {
        let label = label_of(r, schema.len())?;
        let stop = match policy {
            StopwordPolicy::None => None,
            StopwordPolicy::PerLanguageList => Some(&*stop.entry(r.language).or_insert_with(|| stopword_set(r.language))),
        };
        for tok in r.text.split_whitespace() {
            if stop.is_some_and(|s| s.contains(tok)) {
                continue;
            }
            *per_class[label].entry(tok).or_insert(0) += 1;
        }
    }
    Ok(per_class.into_iter().map(|c| rank(c, k)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: String,
    pub count: usize,
    pub mean_char_length: Option<f64>,
    pub mean_word_count: Option<f64>,
    pub top_tokens: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    /// The language of every record, or `None` for a mixed corpus.
    pub language: Option<Language>,
    pub k: usize,
    pub stopwords: StopwordPolicy,
    pub total: usize,
    /// Word counts use whitespace tokenization, which is only approximate
    /// for Urdu.
    pub approximate_word_count: bool,
    pub per_class: Vec<ClassSummary>,
}

pub fn analyze(records: &[Record], schema: &LabelSchema, k: usize, policy: StopwordPolicy) -> Result<EdaReport, EdaError> {
    let dist = class_distribution(records, schema)?;
    let lengths = length_stats(records, schema)?;
    let tops = top_tokens(records, schema, k, policy)?;
    let languages: BTreeSet<Language> = records.iter().map(|r| r.language).collect();
    let language = match languages.len() {
        1 => languages.into_iter().next(),
        _ => None,
    };
    let per_class = dist
        .into_iter()
        .zip(lengths)
        .zip(tops)
        .map(|(((label, count), l), top_tokens)| ClassSummary {
            label,
            count,
            mean_char_length: l.mean_char_length,
            mean_word_count: l.mean_word_count,
            top_tokens,
        })
        .collect();
    Ok(EdaReport {
        language,
        k,
        stopwords: policy,
        total: records.len(),
        approximate_word_count: records.iter().any(|r| r.language == Language::Ur),
        per_class,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_mean(v: Option<f64>) -> String {
    v.map(|m| format!("{m:.6}")).unwrap_or_default()
}

impl EdaReport {
    /// `label,count`
    pub fn dist_csv(&self) -> String {
        let mut out = String::from("label,count\n");
        for c in &self.per_class {
            out += &format!("{},{}\n", csv_field(&c.label), c.count);
        }
        out
    }

    /// `label,count,mean_char_length,mean_word_count`; empty classes have
    /// blank means.
    pub fn lengths_csv(&self) -> String {
        let mut out = String::from("label,count,mean_char_length,mean_word_count\n");
        for c in &self.per_class {
            out += &format!(
                "{},{},{},{}\n",
                csv_field(&c.label),
                c.count,
                fmt_mean(c.mean_char_length),
                fmt_mean(c.mean_word_count)
            );
        }
        out
    }

    /// `(file name, contents)` pairs, one `top_tokens_<label>.csv` per class.
    pub fn top_tokens_csvs(&self) -> Vec<(String, String)> {
        self.per_class
            .iter()
            .map(|c| {
                let mut out = String::from("token,count\n");
                for (t, n) in &c.top_tokens {
                    out += &format!("{},{}\n", csv_field(t), n);
                }
                (format!("top_tokens_{}.csv", c.label), out)
            })
            .collect()
    }
}
