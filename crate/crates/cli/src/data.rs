//! Loading inputs, building feature matrices and writing stamped artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ghalib::corpus::{load_corpus_with, Labels, LoadedCorpus};
use ghalib::features::{concat_features, read_embedding_file, HashedTfidf};
use ghalib::langid::{build_profiles, LanguageIdentifier, DEFAULT_SCORE_FLOOR};
use ghalib::{FeatureMatrix, HeadModel, Language, Record, Split, SplitPlan, Task};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, Provenance, RunConfig};

/// Serializes `body` with the provenance fields alongside its own.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, body: T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Stamped { provenance, body })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn jsonl_line<T: Serialize>(provenance: &Provenance, body: T) -> String {
    serde_json::to_string(&Stamped { provenance, body }).expect("artifact serializes") + "\n"
}

/// CSV or text with a leading `#` provenance line.
pub fn write_commented(path: &Path, provenance: &Provenance, body: &str) -> Result<()> {
    write_file(path, &(provenance.comment() + body))
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

/// Loads the corpus, fills unknown languages from the corpus's own
/// known-language records, and keeps the records in the language scope.
pub fn load_records(config: &RunConfig, labeled: bool) -> Result<Vec<Record>> {
    let schema = config.schema();
    let labels = if labeled { Labels::Schema(&schema) } else { Labels::Ignore };
    let format = config.corpus_format()?;
    let LoadedCorpus { mut records, dropped } = load_corpus_with(&config.corpus, format, labels)?;
    for d in &dropped {
        warn!("{}: line {} ({}) dropped: {}", config.corpus.display(), d.line, d.id, d.reason);
    }
    fill_unknown_languages(&mut records);
    if !config.languages.is_empty() {
        records.retain(|r| config.languages.contains(&r.language));
    }
    if records.is_empty() {
        bail!("{}: no records in scope", config.corpus.display());
    }
    Ok(records)
}

fn fill_unknown_languages(records: &mut [Record]) {
    if !records.iter().any(|r| r.language == Language::Unknown) {
        return;
    }
    let known: Vec<Record> = records.iter().filter(|r| r.language != Language::Unknown).cloned().collect();
    let identifier = build_profiles(&known)
        .ok()
        .and_then(|p| LanguageIdentifier::new(&p, DEFAULT_SCORE_FLOOR).ok());
    match identifier {
        Some(id) => {
            let filled = id.fill_languages(records);
            info!("identified the language of {filled} records");
        }
        None => warn!("records with unknown language and no known-language records to profile"),
    }
}

pub fn read_splits(path: &Path) -> Result<SplitPlan> {
    let text = read_text(path, "split plan")?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{}: invalid split plan", path.display()))?;
    let mut value = value;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("provenance");
    }
    serde_json::from_value(value).with_context(|| format!("{}: invalid split plan", path.display()))
}

/// Indices of `records` in `split`; every record must appear in the plan.
pub fn split_indices(records: &[Record], plan: &SplitPlan, split: Split, plan_path: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match plan.split_of(&r.id) {
            Some(s) if s == split => out.push(i),
            Some(_) => {}
            None => bail!("{}: record {:?} is not in the split plan", plan_path.display(), r.id),
        }
    }
    if out.is_empty() {
        bail!("{}: the {} split has no records in scope", plan_path.display(), split.as_str());
    }
    Ok(out)
}

pub fn labels_at(records: &[Record], indices: &[usize]) -> Result<Vec<usize>> {
    indices
        .iter()
        .map(|&i| {
            records[i]
                .label
                .map(|l| l.0)
                .with_context(|| format!("record {:?} has no label", records[i].id))
        })
        .collect()
}

pub fn subset(records: &[Record], indices: &[usize]) -> Vec<Record> {
    indices.iter().map(|&i| records[i].clone()).collect()
}

/// How the model's inputs are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Hashed TF-IDF fitted on the training split.
    Tfidf { vectorizer: HashedTfidf },
    /// Concatenated GHEM files, one per encoder, in this order.
    Ghem { encoders: usize, dim: usize },
}

/// The model file written by `train` and `tune` and updated by `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub provenance: Provenance,
    pub task: Task,
    pub languages: Vec<Language>,
    pub features: FeatureSpec,
    pub head: HeadModel,
}

impl ModelArtifact {
    pub fn read(path: &Path) -> Result<ModelArtifact> {
        let text = read_text(path, "model")?;
        let model: ModelArtifact = serde_json::from_str(&text).with_context(|| format!("{}: invalid model", path.display()))?;
        // re-validates head kind against parameters
        HeadModel::from_json(&model.head.to_json()).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(path, &text)
    }
}

/// Reads each GHEM file against the ids of all in-scope records and
/// concatenates them column-wise.
pub fn read_ghem(files: &[PathBuf], records: &[Record]) -> Result<FeatureMatrix> {
    if files.is_empty() {
        return Err(crate::Usage("the ghem backend needs at least one --features file".into()).into());
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let parts = files
        .iter()
        .map(|f| read_embedding_file(f, &ids).with_context(|| format!("{}: cannot use embeddings", f.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok(concat_features(&parts)?)
}

/// Feature rows for `records[indices]` under an existing spec.
pub fn features_for(spec: &FeatureSpec, config: &RunConfig, records: &[Record], indices: &[usize]) -> Result<FeatureMatrix> {
    match spec {
        FeatureSpec::Tfidf { vectorizer } => Ok(vectorizer.transform(&subset(records, indices))),
        FeatureSpec::Ghem { encoders, dim } => {
            if config.features.len() != *encoders {
                bail!("model expects {encoders} embedding files; {} given", config.features.len());
            }
            let all = read_ghem(&config.features, records)?;
            if all.dim() != *dim {
                bail!("embeddings have {} columns; model expects {dim}", all.dim());
            }
            let ids: Vec<String> = indices.iter().map(|&i| records[i].id.clone()).collect();
            Ok(all.select(&ids)?)
        }
    }
}

/// Fits the configured backend on the train rows and returns the spec with
/// train and val matrices.
pub fn fit_features(config: &RunConfig, records: &[Record], train: &[usize], val: &[usize]) -> Result<(FeatureSpec, FeatureMatrix, FeatureMatrix)> {
    match config.backend {
        BackendKind::Tfidf => {
            let vectorizer = HashedTfidf::fit(&subset(records, train), config.tfidf_dim, config.ngram_range)
                .map_err(|e| crate::Usage(e.to_string()))?;
            let train_x = vectorizer.transform(&subset(records, train));
            let val_x = vectorizer.transform(&subset(records, val));
            Ok((FeatureSpec::Tfidf { vectorizer }, train_x, val_x))
        }
        BackendKind::Ghem => {
            let all = read_ghem(&config.features, records)?;
            let pick = |idx: &[usize]| all.select(&idx.iter().map(|&i| records[i].id.clone()).collect::<Vec<_>>());
            let spec = FeatureSpec::Ghem {
                encoders: config.features.len(),
                dim: all.dim(),
            };
            Ok((spec, pick(train)?, pick(val)?))
        }
    }
}
