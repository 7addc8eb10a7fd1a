use ghalib::heads::{predict_proba, train_head, weighted_ce_loss, GbdtConfig, HeadConfig, HeadKind};
use ghalib::metrics::evaluate;
use ghalib::rng::stream_rng;
use ghalib::{FeatureMatrix, LabelSchema, TrainConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

/// Standard normal draw (Box-Muller).
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// 1:4 hope to not-hope, unit Gaussians with means one unit apart.
fn imbalanced(seed: u64, n: usize) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = usize::from(i % 5 == 0);
        let shift = if label == 1 { 0.5 } else { -0.5 };
        rows.push(vec![normal(&mut rng) + shift, normal(&mut rng) + shift]);
        y.push(label);
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn hope_weight_does_not_lower_hope_recall() {
    let schema = LabelSchema::binary();
    let mut diff = 0.0;
    for seed in 0..20 {
        let (train_x, train_y) = imbalanced(seed, 250);
        let (test_x, test_y) = imbalanced(seed + 1000, 500);
        let recall = |weights: Vec<f64>| {
            let mut c = TrainConfig::for_schema(&schema);
            c.class_weights = weights;
            c.seed = seed;
            let m = train_head(HeadKind::Logistic, &train_x, &train_y, &schema, &HeadConfig::Linear(c)).unwrap();
            evaluate(&test_y, &m.predict(&test_x).unwrap(), 2).unwrap().1.per_class[1].recall
        };
        diff += recall(vec![1.0, 1.5]) - recall(vec![1.0, 1.0]);
    }
    assert!(diff / 20.0 >= 0.0, "mean recall difference {}", diff / 20.0);
}

fn all_configs(schema: &LabelSchema, seed: u64) -> Vec<(HeadKind, HeadConfig)> {
    let mut linear = TrainConfig::for_schema(schema);
    linear.seed = seed;
    linear.epochs = 5;
    linear.input_dropout = 0.2;
    linear.weight_decay = 0.01;
    let gbdt = GbdtConfig {
        rounds: 5,
        max_depth: 2,
        seed,
        ..GbdtConfig::default()
    };
    vec![
        (HeadKind::Logistic, HeadConfig::Linear(linear.clone())),
        (HeadKind::LinearSvm, HeadConfig::Linear(linear)),
        (HeadKind::Adaboost, HeadConfig::Adaboost { rounds: 5, seed }),
        (HeadKind::Gbdt, HeadConfig::Gbdt(gbdt)),
    ]
}

fn random_problem(seed: u64, n: usize, d: usize, k: usize) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = stream_rng(seed, 1);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    // every class present
    for (c, label) in y.iter_mut().take(k).enumerate() {
        *label = c;
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_are_distributions_and_training_is_deterministic(seed in any::<u64>(), n in 8usize..30, d in 1usize..6, multi in any::<bool>()) {
        let schema = if multi { LabelSchema::multiclass() } else { LabelSchema::binary() };
        let (x, y) = random_problem(seed, n, d, schema.len());
        for (kind, config) in all_configs(&schema, seed) {
            let a = train_head(kind, &x, &y, &schema, &config).unwrap();
            let b = train_head(kind, &x, &y, &schema, &config).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
            let p = predict_proba(&a, &x).unwrap();
            for row in p.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-9, "{kind}: row sums to {}", row.sum());
                prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn batch_loss_is_mean_of_singletons(seed in any::<u64>(), n in 1usize..9, k in 2usize..5) {
        let mut rng = stream_rng(seed, 2);
        let logits = Array2::from_shape_fn((n, k), |_| rng.gen_range(-4.0..4.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
        let (batch, _) = weighted_ce_loss(logits.view(), &labels, &weights).unwrap();
        let singles: f64 = (0..n)
            .map(|i| weighted_ce_loss(logits.slice(ndarray::s![i..i + 1, ..]), &labels[i..i + 1], &weights).unwrap().0)
            .sum();
        prop_assert!((batch - singles / n as f64).abs() < 1e-12);
    }
}

#[test]
fn mismatched_config_is_rejected() {
    let schema = LabelSchema::binary();
    let (x, y) = random_problem(1, 10, 2, 2);
    let err = train_head(HeadKind::Gbdt, &x, &y, &schema, &HeadConfig::Adaboost { rounds: 3, seed: 0 });
    assert!(err.is_err());
}
