#![allow(dead_code)]

use std::path::PathBuf;

use ghalib::calibrate::sweep_default;
use ghalib::corpus::{load_corpus, stratified_split, CorpusFormat, SplitRatios};
use ghalib::features::tfidf::HashedTfidf;
use ghalib::features::ghem;
use ghalib::heads::{predict_proba, GbdtConfig, HeadKind, HeadModel};
use ghalib::metrics::{evaluate, MetricsReport};
use ghalib::rng::stream_rng;
use ghalib::tune::{HeadStudy, SearchSpace, Study, HEAD_LR_SCALE};
use ghalib::{LabelSchema, Language, Record, Split, TrainConfig};
use rand::seq::SliceRandom;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_fixture(name: &str, schema: &LabelSchema) -> Vec<Record> {
    let loaded = load_corpus(&fixture(name), CorpusFormat::Jsonl, schema).expect("fixture loads");
    assert!(loaded.dropped.is_empty(), "fixture rows dropped: {:?}", loaded.dropped);
    loaded.records
}

pub fn manifest() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("manifest.json")).unwrap()).unwrap()
}

/// Per language: ids sorted, shuffled with a seeded generator, first 80% for
/// profiles and the rest held out.
pub fn langid_holdout(records: &[Record], seed: u64) -> (Vec<Record>, Vec<Record>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, lang) in Language::KNOWN.iter().enumerate() {
        let mut group: Vec<&Record> = records.iter().filter(|r| r.language == *lang).collect();
        group.sort_by(|a, b| a.id.cmp(&b.id));
        group.shuffle(&mut stream_rng(seed, i as u64));
        let cut = group.len() * 4 / 5;
        train.extend(group[..cut].iter().map(|r| (*r).clone()));
        test.extend(group[cut..].iter().map(|r| (*r).clone()));
    }
    (train, test)
}

/// A valid encoded file plus the ids it was written for.
pub fn valid_ghem() -> (Vec<u8>, Vec<String>) {
    let ids: Vec<String> = vec!["a".into(), "b".into()];
    let bytes = ghem::encode(&[0.5, -1.0, 2.0, 0.0, 1.5, -0.25], 3, "enc", &ids).unwrap();
    (bytes, ids)
}


/// Header-violation cases: (name, bytes, expected ids, expected error variant).
pub fn ghem_violations() -> Vec<(&'static str, Vec<u8>, Vec<String>, &'static str)> {
    let (good, ids) = valid_ghem();
    let mut cases = Vec::new();

    let mut b = good.clone();
    b[0..4].copy_from_slice(b"GHEX");
    cases.push(("bad magic", b, ids.clone(), "BadMagic"));

    let mut b = good.clone();
    b[4..6].copy_from_slice(&2u16.to_le_bytes());
    cases.push(("version 2", b, ids.clone(), "UnsupportedVersion"));

    let mut b = good.clone();
    b[6..8].copy_from_slice(&1u16.to_le_bytes());
    cases.push(("nonzero flags", b, ids.clone(), "UnsupportedFlags"));

    cases.push(("truncated header", good[..10].to_vec(), ids.clone(), "TruncatedHeader"));

    cases.push(("row count mismatch", good.clone(), vec!["a".into()], "RowCountMismatch"));

    cases.push(("digest over other order", good.clone(), vec!["b".into(), "a".into()], "DigestMismatch"));

    cases.push(("truncated payload", good[..good.len() - 4].to_vec(), ids.clone(), "PayloadLength"));

    let mut b = good.clone();
    b.extend_from_slice(&[0, 0, 0, 0]);
    cases.push(("trailing bytes", b, ids.clone(), "PayloadLength"));

    let mut b = good.clone();
    let n = b.len();
    b[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    cases.push(("NaN value", b, ids.clone(), "NonFinite"));

    let mut b = good;
    let n = b.len();
    b[n - 8..n - 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
    cases.push(("infinite value", b, ids, "NonFinite"));

    cases
}

pub fn labels_of(records: &[Record]) -> Vec<usize> {
    records.iter().map(|r| r.label.expect("labeled").0).collect()
}

pub fn in_split(records: &[Record], split: Split) -> Vec<Record> {
    records.iter().filter(|r| r.split == Some(split)).cloned().collect()
}

pub struct E2eOutcome {
    pub study: Study<HeadModel>,
    pub model: HeadModel,
    pub test: MetricsReport,
}

pub const E2E_DIM: usize = 4096;

/// Split, hashed TF-IDF fitted on train, tuned logistic head, threshold
/// calibrated on validation, metrics on test.
pub fn bilingual_pipeline(seed: u64, trials: usize, parallel: bool) -> E2eOutcome {
    let schema = LabelSchema::binary();
    let mut records = load_fixture("hope_bilingual.jsonl", &schema);
    let plan = stratified_split(&records, SplitRatios::default(), seed).unwrap();
    plan.apply(&mut records);
    let (train, val, test) = (in_split(&records, Split::Train), in_split(&records, Split::Val), in_split(&records, Split::Test));
    let vectorizer = HashedTfidf::fit(&train, E2E_DIM, (1, 1)).unwrap();
    let (train_x, val_x, test_x) = (vectorizer.transform(&train), vectorizer.transform(&val), vectorizer.transform(&test));
    let (train_y, val_y, test_y) = (labels_of(&train), labels_of(&val), labels_of(&test));
    let mut linear = TrainConfig::for_schema(&schema);
    linear.seed = seed;
    let study = HeadStudy {
        kind: HeadKind::Logistic,
        schema: &schema,
        train_x: &train_x,
        train_y: &train_y,
        val_x: &val_x,
        val_y: &val_y,
        linear,
        gbdt: GbdtConfig::default(),
        lr_scale: HEAD_LR_SCALE,
    }
    .run(&SearchSpace::default(), trials, seed, parallel)
    .unwrap();
    let mut model = study.best().model.clone().expect("best trial has a model");
    let val_p: Vec<f64> = predict_proba(&model, &val_x).unwrap().column(1).to_vec();
    model.threshold = Some(sweep_default(&val_p, &val_y).unwrap());
    let test_pred = model.predict(&test_x).unwrap();
    let (_, test) = evaluate(&test_y, &test_pred, 2).unwrap();
    E2eOutcome { study, model, test }
}
