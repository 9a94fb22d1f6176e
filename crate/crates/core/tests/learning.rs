mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use sociobot_core::corpus::split_indices;
use sociobot_core::learners::{self, Fitted};
use sociobot_core::metrics::{auc, mse_risk};
use sociobot_core::seed;
use sociobot_core::simplex::{simplex_risk, solve_simplex_weights};
use sociobot_core::super_learner::{build_level_one, fit_super_learner};
use sociobot_core::{Family, FeatureMatrix, LearnerKind, LearnerSpec, Scaler};

use common::oracle;

/// Two informative features and one noise column; labels drawn from a
/// logistic model so no learner can be perfect.
fn benchmark(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(-2.0..2.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        let c: f64 = rng.random_range(-2.0..2.0);
        let p = 1.0 / (1.0 + (-(2.0 * a - 1.5 * b * b + 1.0)).exp());
        labels.push(u8::from(rng.random_bool(p)));
        rows.push(vec![a, b, c]);
    }
    let ids = (0..n).map(|i| format!("r{i}")).collect();
    let cols = vec!["a".into(), "b".into(), "c".into()];
    let y = labels.iter().map(|&l| l as f64).collect();
    let m = FeatureMatrix::from_rows(ids, cols, &rows, labels, vec![None; n]).unwrap();
    (m, y)
}

fn forest(trees: usize) -> LearnerSpec {
    let mut s = LearnerSpec::new("rf", LearnerKind::RandomForest).with_seed(11);
    s.tree_count = trees;
    s
}

fn matrix(cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
}

proptest! {
    #[test]
    fn simplex_matches_grid(
        l in 1usize..=3,
        n in 5usize..40,
        s in any::<u64>(),
    ) {
        let mut rng = seed::rng(s);
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
        let z: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        let zm = matrix(&z);
        let w = solve_simplex_weights(&zm, &y);
        prop_assert!(w.iter().all(|&a| a >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let got = simplex_risk(&zm, &y, &w);
        let grid = oracle::grid_simplex_risk(&z, &y);
        prop_assert!(got <= grid + 1e-12, "solver {got} worse than grid {grid}");
        prop_assert!(grid - got <= 1e-4, "solver {got} far below grid {grid}");
    }

    #[test]
    fn ensemble_never_worse_than_a_vertex(l in 2usize..6, n in 5usize..60, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let z: Vec<Vec<f64>> = (0..l).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let zm = matrix(&z);
        let w = solve_simplex_weights(&zm, &y);
        let got = simplex_risk(&zm, &y, &w);
        for j in 0..l {
            let mut e = vec![0.0; l];
            e[j] = 1.0;
            prop_assert!(got <= simplex_risk(&zm, &y, &e) + 1e-9);
        }
    }

    #[test]
    fn auc_matches_pair_count(n in 2usize..200, levels in 2u32..20, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let got = auc(&scores, &labels).unwrap();
        prop_assert!((got - oracle::pairwise_auc(&scores, &labels)).abs() <= 1e-12);
        // Strictly increasing transforms keep the ranking.
        let moved: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert!((auc(&moved, &labels).unwrap() - got).abs() <= 1e-12);
    }

    #[test]
    fn split_is_a_partition(n in 2usize..300, ratio in 0.05f64..0.95, s in any::<u64>(), strat in any::<bool>()) {
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let (train, test) = split_indices(&labels, ratio, s, strat).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(&labels, ratio, s, strat).unwrap(), (train, test));
    }

    #[test]
    fn mean_learner_risk_is_bernoulli_variance(n in 2usize..500, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
        let (x, _) = benchmark(n, s);
        let m = learners::train(&LearnerSpec::new("mean", LearnerKind::Mean), &x, &y).unwrap();
        let p = y.iter().sum::<f64>() / n as f64;
        let risk = mse_risk(&m.predict(&x).unwrap(), &y).unwrap();
        prop_assert!((risk - p * (1.0 - p)).abs() <= 1e-9);
    }
}

#[test]
fn scaler_standardizes_training_columns() {
    let (x, _) = benchmark(120, 3);
    let s = Scaler::fit(&x);
    let z = s.apply(&x).unwrap();
    for col in z.values().column_iter() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}

#[test]
fn more_trees_do_not_raise_held_out_risk() {
    let (x, y) = benchmark(600, 5);
    let (train, test): (Vec<usize>, Vec<usize>) = (0..600).partition(|&i| i < 400);
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let yh: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let risk = |trees| {
        let m = learners::train(&forest(trees), &x.select_rows(&train), &yt).unwrap();
        mse_risk(&m.predict(&x.select_rows(&test)).unwrap(), &yh).unwrap()
    };
    let (one, hundred) = (risk(1), risk(100));
    assert!(hundred <= one + 0.01, "1 tree {one}, 100 trees {hundred}");
}

#[test]
fn row_order_leaves_parametric_fits_bit_identical() {
    let (x, y) = benchmark(150, 8);
    let order: Vec<usize> = (0..150).rev().collect();
    let xr = x.select_rows(&order);
    let yr: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    for kind in [LearnerKind::Mean, LearnerKind::Regression] {
        let spec = LearnerSpec::new(kind.as_str(), kind);
        let a = learners::train(&spec, &x, &y).unwrap();
        let b = learners::train(&spec, &xr, &yr).unwrap();
        match (&a.fitted, &b.fitted) {
            (Fitted::Mean(p), Fitted::Mean(q)) => assert_eq!(p.to_bits(), q.to_bits()),
            (Fitted::Linear(p), Fitted::Linear(q)) => assert_eq!(p, q),
            _ => unreachable!(),
        }
    }
}

#[test]
fn level_one_rows_come_from_other_folds() {
    let (x, y) = benchmark(60, 2);
    let mean = LearnerSpec::new("mean", LearnerKind::Mean);
    let z = build_level_one(std::slice::from_ref(&mean), &x, &y, 6, 9).unwrap();
    for i in 0..60 {
        let others: Vec<f64> = (0..60)
            .filter(|&j| z.folds[j] != z.folds[i])
            .map(|j| y[j])
            .collect();
        let want = others.iter().sum::<f64>() / others.len() as f64;
        assert!((z.z[(i, 0)] - want).abs() < 1e-12);
    }
}

#[test]
fn super_learner_weights_and_predictions_are_well_formed() {
    let (x, y) = benchmark(200, 4);
    let library = [
        LearnerSpec::new("mean", LearnerKind::Mean),
        LearnerSpec::new("regression", LearnerKind::Regression),
        LearnerSpec::new("tree", LearnerKind::Tree),
        forest(50),
    ];
    let a = fit_super_learner(&library, &x, &y, Family::Binomial, 5, 1).unwrap();
    let b = fit_super_learner(&library, &x, &y, Family::Binomial, 5, 1).unwrap();
    assert_eq!(a, b);
    assert!(a.weights.iter().all(|&w| w >= 0.0));
    assert!((a.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    assert_eq!(a.weights[0], 0.0, "mean should carry no weight: {:?}", a.weights);
    let p = a.predict(&x).unwrap();
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}
