//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use sociobot_core::pipeline::features_from_networks;
use sociobot_core::super_learner::build_level_one;
use sociobot_core::synth::{generate_external_scores, generate_networks};
use sociobot_core::{
    CorpusRecord, EgoNetwork, FeatureMatrix, LearnerKind, LearnerSpec, ProfileKind, Scaler, SynthConfig,
};

/// The default synthetic corpus held in memory.
pub fn corpus() -> Vec<(CorpusRecord, EgoNetwork)> {
    generate_networks(&SynthConfig::default()).expect("default corpus")
}

/// The largest human network of a small corpus.
pub fn human_network() -> EgoNetwork {
    let synth = SynthConfig::with_counts(&[(ProfileKind::Human, 20), (ProfileKind::BotRandom, 1)]);
    generate_networks(&synth)
        .expect("corpus")
        .into_iter()
        .filter(|(r, _)| r.label == 0)
        .map(|(_, n)| n)
        .max_by_key(|n| n.graph().edge_count())
        .expect("humans present")
}

/// Standardized features of the default corpus with 0/1 targets.
pub fn training_set() -> (FeatureMatrix, Vec<f64>) {
    let m = features_from_networks(&corpus(), 2).expect("features");
    let scaled = Scaler::fit(&m).apply(&m).expect("same columns");
    let y = m.labels_f64();
    (scaled, y)
}

pub fn forest(trees: usize) -> LearnerSpec {
    let mut s = LearnerSpec::new("random_forest", LearnerKind::RandomForest).with_seed(3);
    s.tree_count = trees;
    s
}

/// Out-of-fold predictions of a four-learner library.
pub fn level_one() -> (DMatrix<f64>, Vec<f64>) {
    let (x, y) = training_set();
    let library = [
        LearnerSpec::new("mean", LearnerKind::Mean),
        LearnerSpec::new("regression", LearnerKind::Regression),
        LearnerSpec::new("tree", LearnerKind::Tree),
        forest(20),
    ];
    let z = build_level_one(&library, &x, &y, 10, 1).expect("level one");
    (z.z, y)
}

/// `n` noisy scores for alternating labels.
pub fn scores(n: usize) -> (Vec<f64>, Vec<u8>) {
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let s = generate_external_scores(&labels, 0.35, 0.05, 5).expect("valid noise");
    (s, labels)
}
