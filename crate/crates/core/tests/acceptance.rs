//! Acceptance suite: one check per primary criterion, each printed as a
//! PASS/FAIL line with its runtime. Run with
//! `cargo test -p ghalib-core --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ghalib::calibrate::{sweep_threshold, DEFAULT_HI, DEFAULT_LO, DEFAULT_STEP};
use ghalib::corpus::{stratified_split, LabelId, SplitRatios};
use ghalib::features::ghem;
use ghalib::features::tfidf::HashedTfidf;
use ghalib::features::{read_embedding_file, write_embedding_file, Backend, FeatureError};
use ghalib::heads::{predict_proba, train_logistic, weighted_ce_loss, GbdtConfig, HeadKind};
use ghalib::langid::{build_profiles, route, EncoderSlot, LanguageIdentifier, DEFAULT_SCORE_FLOOR};
use ghalib::metrics::{confusion, report, ConfusionMatrix};
use ghalib::rng::stream_rng;
use ghalib::tune::{sample_trial, HeadStudy, SearchSpace, HEAD_LR_SCALE};
use ghalib::{FeatureMatrix, LabelSchema, Language, Record, Split, TrainConfig};
use ndarray::Array2;
use rand::Rng;

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- metric oracle ----

fn brute_force_metrics(y: &[usize], p: &[usize], k: usize) -> (f64, Vec<(f64, f64, f64, usize)>, f64, f64) {
    let n = y.len();
    let mut per = Vec::new();
    let mut correct = 0;
    for (a, b) in y.iter().zip(p) {
        if a == b {
            correct += 1;
        }
    }
    for c in 0..k {
        let tp = y.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count();
        let fp = y.iter().zip(p).filter(|(a, b)| **a != c && **b == c).count();
        let fnn = y.iter().zip(p).filter(|(a, b)| **a == c && **b != c).count();
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
        let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        per.push((prec, rec, f1, tp + fnn));
    }
    let macro_f1 = per.iter().map(|c| c.2).sum::<f64>() / k as f64;
    let weighted = per.iter().map(|c| c.2 * c.3 as f64).sum::<f64>() / n as f64;
    (correct as f64 / n as f64, per, macro_f1, weighted)
}

fn metric_oracle() -> Check {
    let mut rng = stream_rng(101, 0);
    for case in 0..1000 {
        let k = if rng.gen_bool(0.5) { 2 } else { 4 };
        let n = rng.gen_range(1..=30);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let r = report(&confusion(&y, &p, k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (acc, per, macro_f1, weighted) = brute_force_metrics(&y, &p, k);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let mut ok = close(r.accuracy, acc) && close(r.macro_f1, macro_f1) && close(r.weighted_f1, weighted);
        for (m, o) in r.per_class.iter().zip(&per) {
            ok &= close(m.precision, o.0) && close(m.recall, o.1) && close(m.f1, o.2) && m.support as usize == o.3;
        }
        ensure(ok, || format!("case {case}: report differs from recount for y={y:?} p={p:?}"))?;
    }
    let r = report(&ConfusionMatrix::from_counts(vec![vec![50, 10], vec![5, 35]])).map_err(|e| e.to_string())?;
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-4;
    ensure(
        near(r.accuracy, 0.85) && near(r.per_class[1].f1, 0.8235) && near(r.macro_f1, 0.8466) && near(r.weighted_f1, 0.8512),
        || format!("worked matrix gave {r:?}"),
    )
}

// ---- split exactness ----

/// Integer largest remainder for percentages summing to 100.
fn exact_allocation(n: usize, pct: [usize; 3]) -> [usize; 3] {
    let mut counts = [0; 3];
    let mut rem = [0; 3];
    for i in 0..3 {
        counts[i] = n * pct[i] / 100;
        rem[i] = n * pct[i] % 100;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = vec![0, 1, 2];
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn records_with_counts(counts: &[usize]) -> Vec<Record> {
    let mut out = Vec::new();
    for (class, &n) in counts.iter().enumerate() {
        for i in 0..n {
            out.push(Record::new(format!("r{class}-{i:03}"), "text", Language::En, Some(LabelId(class))));
        }
    }
    out
}

fn split_exactness() -> Check {
    let mut rng = stream_rng(202, 0);
    let mut cases: Vec<(Vec<usize>, [usize; 3])> = vec![(vec![60, 40], [70, 15, 15])];
    while cases.len() < 200 {
        let k = rng.gen_range(2..=4);
        let counts = (0..k).map(|_| rng.gen_range(3..=80)).collect();
        let a = rng.gen_range(1..=98);
        let b = rng.gen_range(1..=99 - a);
        cases.push((counts, [a, b, 100 - a - b]));
    }
    for (case, (counts, pct)) in cases.iter().enumerate() {
        let records = records_with_counts(counts);
        let ratios = SplitRatios::new(pct.map(|p| p as f64 / 100.0)).map_err(|e| e.to_string())?;
        let seed = case as u64;
        let plan = stratified_split(&records, ratios, seed).map_err(|e| e.to_string())?;
        let got = plan.class_counts(&records, counts.len());
        for (c, &n) in counts.iter().enumerate() {
            let want = exact_allocation(n, *pct);
            ensure(got[c] == want, || format!("case {case}: class {c} of {n} at {pct:?} got {:?}, want {want:?}", got[c]))?;
        }
        let again = stratified_split(&records, ratios, seed).map_err(|e| e.to_string())?;
        ensure(plan.to_json() == again.to_json(), || format!("case {case}: rerun differs"))?;
    }
    let records = records_with_counts(&[60, 40]);
    let plan = stratified_split(&records, SplitRatios::default(), 0).map_err(|e| e.to_string())?;
    ensure(plan.class_counts(&records, 2) == vec![[42, 9, 9], [28, 6, 6]], || "60/40 case".into())
}

// ---- gradient check ----

fn gradient_check() -> Check {
    let mut rng = stream_rng(303, 0);
    let h = 1e-6;
    for case in 0..200 {
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(2..=4);
        let logits = Array2::from_shape_fn((n, k), |_| rng.gen_range(-3.0..3.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
        let (_, grad) = weighted_ce_loss(logits.view(), &labels, &weights).map_err(|e| e.to_string())?;
        let mut num = Array2::zeros((n, k));
        for i in 0..n {
            for j in 0..k {
                let mut up = logits.clone();
                up[[i, j]] += h;
                let mut down = logits.clone();
                down[[i, j]] -= h;
                let lu = weighted_ce_loss(up.view(), &labels, &weights).unwrap().0;
                let ld = weighted_ce_loss(down.view(), &labels, &weights).unwrap().0;
                num[[i, j]] = (lu - ld) / (2.0 * h);
            }
        }
        let diff = (&grad - &num).mapv(|v| v * v).sum().sqrt();
        let scale = grad.mapv(|v| v * v).sum().sqrt().max(num.mapv(|v| v * v).sum().sqrt()).max(1e-12);
        ensure(diff / scale < 1e-4, || format!("case {case}: relative error {}", diff / scale))?;
    }
    let (loss, _) = weighted_ce_loss(Array2::zeros((1, 2)).view(), &[1], &[1.0, 1.5]).map_err(|e| e.to_string())?;
    ensure((loss - 1.5 * 2f64.ln()).abs() < 1e-9, || format!("zero logits gave {loss}"))
}

// ---- bias-only closed form ----

fn bias_only() -> Check {
    let x = FeatureMatrix::from_rows(&vec![vec![0.0; 4]; 100]).map_err(|e| e.to_string())?;
    let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
    let schema = LabelSchema::binary();
    let mut c = TrainConfig::for_schema(&schema);
    c.class_weights = vec![1.0, 1.5];
    c.epochs = 120;
    let m = train_logistic(&x, &y, &schema, &c).map_err(|e| e.to_string())?;
    let p = predict_proba(&m, &x).map_err(|e| e.to_string())?;
    ensure((p[[0, 0]] - 0.5).abs() < 1e-3 && (p[[0, 1]] - 0.5).abs() < 1e-3, || format!("predicted ({}, {})", p[[0, 0]], p[[0, 1]]))
}

// ---- threshold sweep ----

fn brute_force_sweep(p: &[f64], y: &[usize]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for i in 30..=80 {
        let t = i as f64 / 100.0;
        let pred: Vec<usize> = p.iter().map(|&v| usize::from(v >= t)).collect();
        let (_, _, macro_f1, _) = brute_force_metrics(y, &pred, 2);
        if macro_f1 > best.1 {
            best = (t, macro_f1);
        }
    }
    best
}

fn threshold_sweep() -> Check {
    let mut rng = stream_rng(505, 0);
    for case in 0..100 {
        let n = rng.gen_range(2..=60);
        let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        // half the sets sit on the grid to exercise ties and the >= rule
        let on_grid = case % 2 == 0;
        let p: Vec<f64> = (0..n)
            .map(|i| {
                let base: f64 = if y[i] == 1 { 0.2 } else { 0.0 } + rng.gen_range(0.0..0.8);
                if on_grid {
                    (base * 100.0).round() / 100.0
                } else {
                    base
                }
            })
            .collect();
        let got = sweep_threshold(&p, &y, DEFAULT_LO, DEFAULT_HI, DEFAULT_STEP).map_err(|e| e.to_string())?;
        let (t, f) = brute_force_sweep(&p, &y);
        ensure(got.threshold == t && (got.objective_value - f).abs() <= 1e-12, || {
            format!("case {case}: got ({}, {}), oracle ({t}, {f})", got.threshold, got.objective_value)
        })?;
        ensure((0.30..=0.80).contains(&got.threshold), || format!("case {case}: threshold {}", got.threshold))?;
    }
    Ok(())
}

// ---- search containment and reproducibility ----

fn search_space() -> Check {
    let space = SearchSpace::default();
    for t in 0..1000 {
        let c = sample_trial(&space, t as u64 / 100, t);
        let ok = (5e-6..=5e-5).contains(&c.learning_rate)
            && [4, 8, 16].contains(&c.batch_size)
            && (0.0..=0.3).contains(&c.warmup_ratio)
            && (0.0..=0.1).contains(&c.weight_decay)
            && (0.1..=0.3).contains(&c.input_dropout);
        ensure(ok, || format!("trial {t} outside the space: {c:?}"))?;
    }

    let schema = LabelSchema::binary();
    let mut records = load_fixture("hope_bilingual.jsonl", &schema);
    stratified_split(&records, SplitRatios::default(), 11).map_err(|e| e.to_string())?.apply(&mut records);
    let (train, val) = (in_split(&records, Split::Train), in_split(&records, Split::Val));
    let v = HashedTfidf::fit(&train, E2E_DIM, (1, 1)).map_err(|e| e.to_string())?;
    let (tx, vx) = (v.transform(&train), v.transform(&val));
    let (ty, vy) = (labels_of(&train), labels_of(&val));
    let study = HeadStudy {
        kind: HeadKind::Logistic,
        schema: &schema,
        train_x: &tx,
        train_y: &ty,
        val_x: &vx,
        val_y: &vy,
        linear: TrainConfig::for_schema(&schema),
        gbdt: GbdtConfig::default(),
        lr_scale: HEAD_LR_SCALE,
    };
    let a = study.run(&space, 30, 11, true).map_err(|e| e.to_string())?;
    let b = study.run(&space, 30, 11, true).map_err(|e| e.to_string())?;
    ensure(a.to_jsonl() == b.to_jsonl(), || "study logs differ".into())?;
    ensure(a.best == b.best, || "best trials differ".into())?;
    let (ma, mb) = (a.best().model.as_ref().unwrap(), b.best().model.as_ref().unwrap());
    ensure(ma.to_json() == mb.to_json(), || "best models differ".into())
}

// ---- language identification ----

fn language_id() -> Check {
    let records = load_fixture("multilingual.jsonl", &LabelSchema::binary());
    let (train, held_out) = langid_holdout(&records, 7);
    let id = LanguageIdentifier::new(&build_profiles(&train).map_err(|e| e.to_string())?, DEFAULT_SCORE_FLOOR).map_err(|e| e.to_string())?;
    let correct = held_out
        .iter()
        .filter(|r| id.identify(&r.text).map(|i| i.language == r.language).unwrap_or(false))
        .count();
    let acc = correct as f64 / held_out.len() as f64;
    ensure(acc >= 0.98, || format!("held-out accuracy {acc} ({correct}/{})", held_out.len()))?;
    let routes = [
        (Language::Ur, EncoderSlot::UrEnc),
        (Language::En, EncoderSlot::EnEnc),
        (Language::De, EncoderSlot::EuroEnc),
        (Language::Es, EncoderSlot::EuroEnc),
    ];
    for (lang, slot) in routes {
        let r = route(lang);
        ensure(r.slot == slot && !r.fallback, || format!("{lang:?} routed to {:?}", r))?;
    }
    Ok(())
}

// ---- end-to-end ----

/// Hope recall on test with a fixed, untuned configuration.
fn hope_recall(seed: u64, weights: [f64; 2]) -> Result<f64, String> {
    let schema = LabelSchema::binary();
    let mut records = load_fixture("hope_bilingual.jsonl", &schema);
    stratified_split(&records, SplitRatios::default(), seed).map_err(|e| e.to_string())?.apply(&mut records);
    let (train, test) = (in_split(&records, Split::Train), in_split(&records, Split::Test));
    let v = HashedTfidf::fit(&train, E2E_DIM, (1, 1)).map_err(|e| e.to_string())?;
    let mut c = TrainConfig::for_schema(&schema);
    c.class_weights = weights.to_vec();
    c.learning_rate = 1.0;
    c.seed = seed;
    let m = train_logistic(&v.transform(&train), &labels_of(&train), &schema, &c).map_err(|e| e.to_string())?;
    let pred = m.predict(&v.transform(&test)).map_err(|e| e.to_string())?;
    let y = labels_of(&test);
    let (_, r) = ghalib::metrics::evaluate(&y, &pred, 2).map_err(|e| e.to_string())?;
    Ok(r.per_class[1].recall)
}

fn end_to_end() -> Check {
    let outcome = bilingual_pipeline(2024, 30, true);
    let f1 = outcome.test.macro_f1;
    ensure(f1 >= 0.90, || format!("test macro-F1 {f1}"))?;
    let mut weighted = 0.0;
    let mut plain = 0.0;
    for seed in 0..20 {
        weighted += hope_recall(seed, [1.0, 1.5])?;
        plain += hope_recall(seed, [1.0, 1.0])?;
    }
    ensure(weighted >= plain, || format!("mean hope recall weighted {} < unweighted {}", weighted / 20.0, plain / 20.0))
}

// ---- GHEM ----

fn ghem_reader() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = stream_rng(909, 0);
    for case in 0..100 {
        let rows = rng.gen_range(1..=20);
        let dim = rng.gen_range(1..=32);
        let values: Vec<f32> = (0..rows * dim).map(|_| rng.gen_range(-1e3f32..1e3)).collect();
        let ids: Vec<String> = (0..rows).map(|i| format!("doc-{case}-{i}")).collect();
        let data = Array2::from_shape_vec((rows, dim), values.iter().map(|&v| f64::from(v)).collect()).unwrap();
        let m = FeatureMatrix::new(Backend::Embedding, data, ids.clone()).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("m{case}.ghem"));
        write_embedding_file(&path, &m, "test-encoder").map_err(|e| e.to_string())?;
        let back = read_embedding_file(&path, &ids).map_err(|e| e.to_string())?;
        let same = back.row_ids() == ids.as_slice()
            && back.data().iter().zip(&values).all(|(a, b)| (*a as f32).to_bits() == b.to_bits() && *a == f64::from(*b));
        ensure(same, || format!("case {case}: round trip changed the matrix"))?;
    }
    for (name, bytes, ids, variant) in ghem_violations() {
        match ghem::decode(&bytes, &ids) {
            Ok(_) => return Err(format!("{name}: accepted")),
            Err(e) => {
                let got = format!("{e:?}");
                ensure(got.starts_with(variant), || format!("{name}: expected {variant}, got {got}"))?;
            }
        }
    }
    let missing = read_embedding_file(&dir.path().join("absent.ghem"), &[]);
    ensure(matches!(missing, Err(FeatureError::Io { .. })), || "missing file not reported as io error".into())
}

#[test]
fn acceptance_suite() {
    let criteria: [(&str, fn() -> Check, u64); 9] = [
        ("metric oracle", metric_oracle, 5),
        ("split exactness", split_exactness, 2),
        ("gradient check", gradient_check, 5),
        ("bias-only closed form", bias_only, 5),
        ("threshold sweep oracle", threshold_sweep, 2),
        ("search-space containment", search_space, 10),
        ("language identification", language_id, 5),
        ("end-to-end smoke", end_to_end, 120),
        ("GHEM reader", ghem_reader, 2),
    ];
    let mut failures = Vec::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        match (&result, over) {
            (Ok(()), false) => println!("PASS  {name:<26} {:>8.3}s (budget {budget}s)", elapsed.as_secs_f64()),
            (Ok(()), true) => {
                println!("FAIL  {name:<26} {:>8.3}s exceeds budget {budget}s", elapsed.as_secs_f64());
                failures.push(name);
            }
            (Err(msg), _) => {
                println!("FAIL  {name:<26} {:>8.3}s {msg}", elapsed.as_secs_f64());
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
