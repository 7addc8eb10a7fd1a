use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ghalib::calibrate::sweep_threshold;
use ghalib::corpus::{load_corpus_with, stratified_split, Labels};
use ghalib::eda::analyze;
use ghalib::heads::{predict_proba, train_head, HeadConfig, HeadKind};
use ghalib::langid::{build_profiles, LanguageIdentifier, DEFAULT_SCORE_FLOOR};
use ghalib::metrics::evaluate as score;
use ghalib::tune::{HeadStudy, SearchSpace, TuneError, HEAD_LR_SCALE};
use ghalib::{Language, Record, Split};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::data::*;
use crate::Usage;

pub fn split(config: &RunConfig) -> Result<()> {
    let records = load_records(config, true)?;
    let plan = stratified_split(&records, config.split_ratios(), config.seed)?;
    let out = config.out.clone().unwrap_or_else(|| config.splits.clone());
    write_json(&out, &config.provenance(), &plan)?;
    let mut counts = [0usize; 3];
    for s in plan.assignment.values() {
        counts[s.index()] += 1;
    }
    println!("train {} val {} test {} -> {}", counts[0], counts[1], counts[2], out.display());
    Ok(())
}

pub fn analyze_corpus(config: &RunConfig) -> Result<()> {
    let records = load_records(config, true)?;
    let report = analyze(&records, &config.schema(), config.top_k, config.stopwords).map_err(|e| Usage(e.to_string()))?;
    let dir = config.out.clone().unwrap_or_else(|| "eda".into());
    let provenance = config.provenance();
    write_json(&dir.join("eda.json"), &provenance, &report)?;
    write_commented(&dir.join("dist.csv"), &provenance, &report.dist_csv())?;
    write_commented(&dir.join("lengths.csv"), &provenance, &report.lengths_csv())?;
    for (name, body) in report.top_tokens_csvs() {
        write_commented(&dir.join(name), &provenance, &body)?;
    }
    println!("{} records analyzed -> {}", report.total, dir.display());
    Ok(())
}

/// Records with their train and val row indices.
struct Prepared {
    records: Vec<Record>,
    train: Vec<usize>,
    val: Vec<usize>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let records = load_records(config, true)?;
    let plan = read_splits(&config.splits)?;
    let train = split_indices(&records, &plan, Split::Train, &config.splits)?;
    let val = split_indices(&records, &plan, Split::Val, &config.splits)?;
    Ok(Prepared { records, train, val })
}

fn head_config(config: &RunConfig) -> Result<HeadConfig> {
    let schema = config.schema();
    Ok(match config.head {
        HeadKind::Logistic | HeadKind::LinearSvm => {
            let c = config.train_config();
            c.validate(schema.len()).map_err(|e| Usage(e.to_string()))?;
            HeadConfig::Linear(c)
        }
        HeadKind::Adaboost => HeadConfig::Adaboost {
            rounds: config.adaboost_rounds(),
            seed: config.seed,
        },
        HeadKind::Gbdt => HeadConfig::Gbdt(config.gbdt_config()),
    })
}

pub fn train(config: &RunConfig) -> Result<()> {
    let p = prepare(config)?;
    let schema = config.schema();
    let (features, train_x, val_x) = fit_features(config, &p.records, &p.train, &p.val)?;
    let train_y = labels_at(&p.records, &p.train)?;
    let val_y = labels_at(&p.records, &p.val)?;
    let head = train_head(config.head, &train_x, &train_y, &schema, &head_config(config)?)?;
    let (_, report) = score(&val_y, &head.predict(&val_x)?, schema.len())?;
    ModelArtifact {
        provenance: config.provenance(),
        task: config.task,
        languages: config.languages.clone(),
        features,
        head,
    }
    .write(&config.model)?;
    println!("val macro-F1 {:.4} -> {}", report.macro_f1, config.model.display());
    Ok(())
}

pub fn tune(config: &RunConfig) -> Result<()> {
    let p = prepare(config)?;
    let schema = config.schema();
    let (features, train_x, val_x) = fit_features(config, &p.records, &p.train, &p.val)?;
    let train_y = labels_at(&p.records, &p.train)?;
    let val_y = labels_at(&p.records, &p.val)?;
    let study = HeadStudy {
        kind: config.head,
        schema: &schema,
        train_x: &train_x,
        train_y: &train_y,
        val_x: &val_x,
        val_y: &val_y,
        linear: config.train_config(),
        gbdt: config.gbdt_config(),
        lr_scale: HEAD_LR_SCALE,
    }
    .run(&SearchSpace::default(), config.trials, config.seed, true)
    .map_err(|e| match e {
        TuneError::ZeroBudget => anyhow::Error::new(Usage(e.to_string())),
        other => other.into(),
    })?;
    let provenance = config.provenance();
    let log: String = study.trials.iter().map(|t| jsonl_line(&provenance, t.summary())).collect();
    let log_path = config.out.clone().unwrap_or_else(|| "study.jsonl".into());
    write_file(&log_path, &log)?;
    let best = study.into_best();
    let objective = best.objective;
    ModelArtifact {
        provenance,
        task: config.task,
        languages: config.languages.clone(),
        features,
        head: best.model.expect("best trial keeps its model"),
    }
    .write(&config.model)?;
    println!(
        "best trial {} val macro-F1 {objective:.4} -> {}, {}",
        best.trial_index,
        config.model.display(),
        log_path.display()
    );
    Ok(())
}

/// Reads the model and aligns task and language scope with it.
fn load_model(config: &mut RunConfig) -> Result<ModelArtifact> {
    let model = ModelArtifact::read(&config.model)?;
    config.task = model.task;
    if config.languages.is_empty() {
        config.languages = model.languages.clone();
    }
    Ok(model)
}

pub fn calibrate(mut config: RunConfig) -> Result<()> {
    let mut model = load_model(&mut config)?;
    if model.head.n_classes() != 2 {
        bail!(Usage("calibrate applies to binary models only".into()));
    }
    let p = prepare(&config)?;
    let x = features_for(&model.features, &config, &p.records, &p.val)?;
    let y = labels_at(&p.records, &p.val)?;
    let proba = predict_proba(&model.head, &x)?;
    let hope: Vec<f64> = proba.column(1).to_vec();
    let (lo, hi, step) = config.threshold;
    let t = sweep_threshold(&hope, &y, lo, hi, step).map_err(|e| Usage(e.to_string()))?;
    println!("threshold {:.2} val macro-F1 {:.4} -> {}", t.threshold, t.objective_value, config.model.display());
    model.head.threshold = Some(t);
    model.provenance = config.provenance();
    model.write(&config.model)
}

pub fn evaluate(mut config: RunConfig) -> Result<()> {
    let model = load_model(&mut config)?;
    let split: Split = config.split.parse().map_err(Usage)?;
    let records = load_records(&config, true)?;
    let plan = read_splits(&config.splits)?;
    let idx = split_indices(&records, &plan, split, &config.splits)?;
    let x = features_for(&model.features, &config, &records, &idx)?;
    let y = labels_at(&records, &idx)?;
    let schema = model.head.schema.clone();
    let (cm, report) = score(&y, &model.head.predict(&x)?, schema.len())?;
    let dir = config.out.clone().unwrap_or_else(|| ".".into());
    let provenance = config.provenance();
    let body = json!({
        "split": split,
        "rows": idx.len(),
        "labels": schema.labels,
        "threshold": model.head.threshold.as_ref().map(|t| t.threshold),
        "metrics": report,
    });
    write_json(&dir.join("metrics.json"), &provenance, body)?;
    write_commented(&dir.join("metrics.txt"), &provenance, &report.to_table(&schema.labels))?;
    write_commented(&dir.join("confusion.csv"), &provenance, &cm.to_csv(&schema.labels))?;
    println!("{} macro-F1 {:.4} -> {}", split.as_str(), report.macro_f1, dir.display());
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    language: Language,
    label: &'a str,
    proba: Vec<f64>,
}

pub fn predict(mut config: RunConfig) -> Result<()> {
    let model = load_model(&mut config)?;
    let records = load_records(&config, false)?;
    let all: Vec<usize> = (0..records.len()).collect();
    let x = features_for(&model.features, &config, &records, &all)?;
    let proba = predict_proba(&model.head, &x)?;
    let labels = model.head.predict(&x)?;
    let provenance = config.provenance();
    let schema = &model.head.schema;
    let lines: String = records
        .iter()
        .zip(proba.rows())
        .zip(&labels)
        .map(|((r, p), &l)| {
            jsonl_line(
                &provenance,
                Prediction {
                    id: &r.id,
                    language: r.language,
                    label: &schema.labels[l],
                    proba: p.to_vec(),
                },
            )
        })
        .collect();
    let out = config.out.clone().unwrap_or_else(|| "predictions.jsonl".into());
    write_file(&out, &lines)?;
    println!("{} predictions -> {}", records.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct LangIdLine<'a> {
    id: &'a str,
    given: Language,
    identified: Language,
    score: f64,
}

/// Identifies every record against profiles built from the known-language
/// records of `profiles` (or of the corpus itself).
pub fn langid(config: &RunConfig, profiles: Option<PathBuf>) -> Result<()> {
    let load = |path: &PathBuf| -> Result<Vec<Record>> {
        let format = ghalib::corpus::CorpusFormat::from_path(path).map_err(|e| Usage(e.to_string()))?;
        Ok(load_corpus_with(path, format, Labels::Ignore)?.records)
    };
    let records = load(&config.corpus)?;
    let source = profiles.unwrap_or_else(|| config.corpus.clone());
    let known: Vec<Record> = load(&source)?.into_iter().filter(|r| r.language != Language::Unknown).collect();
    let built = build_profiles(&known).with_context(|| format!("{}: cannot build language profiles", source.display()))?;
    let identifier = LanguageIdentifier::new(&built, DEFAULT_SCORE_FLOOR)?;
    let provenance = config.provenance();
    let mut lines = String::new();
    for r in &records {
        let id = identifier.identify(&r.text)?;
        lines.push_str(&jsonl_line(
            &provenance,
            LangIdLine {
                id: &r.id,
                given: r.language,
                identified: id.language,
                score: id.score,
            },
        ));
    }
    let out = config.out.clone().unwrap_or_else(|| "langid.jsonl".into());
    write_file(&out, &lines)?;
    println!("{} records identified -> {}", records.len(), out.display());
    Ok(())
}
