//! Base learners behind a common train/predict contract.
//!
//! The library covers a constant benchmark, penalized regression, a single
//! CART tree, bagged trees and a random forest. Randomized learners draw
//! every tree's stream from `(spec.seed, tree index)`, so fits are
//! reproducible and independent of scheduling.

pub mod regression;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

pub use regression::Linear;
pub use tree::{Criterion, Node, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    Mean,
    Regression,
    Tree,
    BaggedTrees,
    RandomForest,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Mean => "mean",
            LearnerKind::Regression => "regression",
            LearnerKind::Tree => "tree",
            LearnerKind::BaggedTrees => "bagged_trees",
            LearnerKind::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean" => LearnerKind::Mean,
            "regression" => LearnerKind::Regression,
            "tree" => LearnerKind::Tree,
            "bagged_trees" => LearnerKind::BaggedTrees,
            "random_forest" => LearnerKind::RandomForest,
            _ => return Err(Error::argument(format!("unknown learner kind {s:?}"))),
        })
    }
}

/// Response family. Binomial learners predict the probability of class 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Binomial,
    Gaussian,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Binomial => "binomial",
            Family::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(Family::Binomial),
            "gaussian" => Ok(Family::Gaussian),
            _ => Err(Error::argument(format!("unknown family {s:?}"))),
        }
    }
}

pub const DEFAULT_TREE_COUNT: usize = 200;
pub const DEFAULT_BAG_COUNT: usize = 250;
pub const DEFAULT_MIN_LEAF: usize = 5;
pub const DEFAULT_RIDGE_PENALTY: f64 = 1.0;

/// Configuration of one library member.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    /// Display name; unique within a library.
    pub name: String,
    pub kind: LearnerKind,
    pub tree_count: usize,
    pub bag_count: usize,
    /// `None` means `floor(sqrt(p))` for forests and all features otherwise.
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub ridge_penalty: f64,
    pub family: Family,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(name: impl Into<String>, kind: LearnerKind) -> Self {
        LearnerSpec {
            name: name.into(),
            kind,
            tree_count: DEFAULT_TREE_COUNT,
            bag_count: DEFAULT_BAG_COUNT,
            features_per_split: None,
            max_depth: None,
            min_leaf: DEFAULT_MIN_LEAF,
            ridge_penalty: DEFAULT_RIDGE_PENALTY,
            family: Family::Binomial,
            seed: 0,
        }
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::argument(format!("learner {}: {m}", self.name)));
        if self.tree_count == 0 {
            return bad("tree_count must be at least 1");
        }
        if self.bag_count == 0 {
            return bad("bag_count must be at least 1");
        }
        if self.features_per_split == Some(0) {
            return bad("features_per_split must be at least 1");
        }
        if self.min_leaf == 0 {
            return bad("min_leaf must be at least 1");
        }
        if !(self.ridge_penalty >= 0.0 && self.ridge_penalty.is_finite()) {
            return bad("ridge_penalty must be a non-negative number");
        }
        Ok(())
    }

    fn tree_params(&self, p: usize) -> TreeParams {
        let features_per_split = match self.kind {
            LearnerKind::RandomForest => {
                let m = self
                    .features_per_split
                    .unwrap_or_else(|| (p as f64).sqrt().floor() as usize);
                Some(m.clamp(1, p.max(1)))
            }
            _ => self.features_per_split.map(|m| m.clamp(1, p.max(1))),
        };
        TreeParams {
            criterion: match self.family {
                Family::Binomial => Criterion::Gini,
                Family::Gaussian => Criterion::Variance,
            },
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
            features_per_split,
        }
    }
}

/// Parameters learned by [`train`].
#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Mean(f64),
    Linear(Linear),
    Tree(Tree),
    /// Trees whose predictions are averaged.
    Ensemble(Vec<Tree>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerModel {
    pub spec: LearnerSpec,
    /// Column names seen at fit time, in order.
    pub features: Vec<String>,
    pub fitted: Fitted,
}

fn check_inputs(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    spec.validate()?;
    if x.n_cols() == 0 {
        return Err(Error::argument(format!(
            "learner {}: no feature columns",
            spec.name
        )));
    }
    if x.n_rows() != y.len() {
        return Err(Error::argument(format!(
            "learner {}: {} rows but {} targets",
            spec.name,
            x.n_rows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::argument(format!(
            "learner {}: need at least 2 rows",
            spec.name
        )));
    }
    if x.values().iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument(format!(
            "learner {}: non-finite input",
            spec.name
        )));
    }
    if spec.family == Family::Binomial && y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::argument(format!(
            "learner {}: binomial targets must be 0 or 1",
            spec.name
        )));
    }
    Ok(())
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(y: &[f64]) -> f64 {
    let mut v = y.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-row bootstrap multiplicities for tree `t`.
fn bootstrap(n: usize, spec_seed: u64, t: usize) -> (Vec<u32>, rand_chacha::ChaCha8Rng) {
    let mut rng = seed::rng(seed::derive(spec_seed, t as u64));
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    (counts, rng)
}

fn grow_ensemble(spec: &LearnerSpec, x: &DMatrix<f64>, y: &[f64], trees: usize) -> Vec<Tree> {
    let params = spec.tree_params(x.ncols());
    let presorted = tree::Presorted::new(x);
    (0..trees)
        .into_par_iter()
        .map(|t| {
            let (counts, mut rng) = bootstrap(x.nrows(), spec.seed, t);
            tree::grow(x, y, &presorted, &counts, &params, &mut rng)
        })
        .collect()
}

/// Fits `spec` on `(x, y)`.
pub fn train(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64]) -> Result<LearnerModel> {
    check_inputs(spec, x, y)?;
    let values = x.values();
    let fitted = match spec.kind {
        LearnerKind::Mean => Fitted::Mean(stable_mean(y)),
        LearnerKind::Regression => match spec.family {
            Family::Gaussian => Fitted::Linear(regression::fit_gaussian(values, y, spec.ridge_penalty)),
            Family::Binomial => {
                let positives = y.iter().filter(|&&t| t == 1.0).count();
                if positives == 0 || positives == y.len() {
                    warn!(
                        "learner {}: single-class targets; falling back to the mean model",
                        spec.name
                    );
                    Fitted::Mean(stable_mean(y))
                } else {
                    Fitted::Linear(regression::fit_logistic(values, y, spec.ridge_penalty))
                }
            }
        },
        LearnerKind::Tree => {
            let presorted = tree::Presorted::new(values);
            let mut rng = seed::rng(spec.seed);
            Fitted::Tree(tree::grow(
                values,
                y,
                &presorted,
                &vec![1; y.len()],
                &spec.tree_params(values.ncols()),
                &mut rng,
            ))
        }
        LearnerKind::BaggedTrees => Fitted::Ensemble(grow_ensemble(spec, values, y, spec.bag_count)),
        LearnerKind::RandomForest => Fitted::Ensemble(grow_ensemble(spec, values, y, spec.tree_count)),
    };
    Ok(LearnerModel {
        spec: spec.clone(),
        features: x.columns().to_vec(),
        fitted,
    })
}

impl LearnerModel {
    /// Scores every row of `x`. Binomial scores are clamped to `[0, 1]`.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.columns() != self.features.as_slice() {
            return Err(Error::argument(format!(
                "learner {}: expected columns {:?}, got {:?}",
                self.spec.name,
                self.features,
                x.columns()
            )));
        }
        let values = x.values();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "learner {}: non-finite input",
                self.spec.name
            )));
        }
        let raw: Vec<f64> = match &self.fitted {
            Fitted::Mean(m) => vec![*m; x.n_rows()],
            Fitted::Linear(lin) => (0..x.n_rows())
                .map(|i| lin.predict_row(|j| values[(i, j)]))
                .collect(),
            Fitted::Tree(t) => t.predict(values),
            Fitted::Ensemble(trees) => {
                let mut acc = vec![0.0; x.n_rows()];
                for t in trees {
                    for (a, p) in acc.iter_mut().zip(t.predict(values)) {
                        *a += p;
                    }
                }
                let k = trees.len().max(1) as f64;
                acc.into_iter().map(|a| a / k).collect()
            }
        };
        Ok(match self.spec.family {
            Family::Binomial => raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            Family::Gaussian => raw,
        })
    }
}

pub fn predict(model: &LearnerModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}
