//! Super Learner stacking: cross-validated level-one predictions, simplex
//! meta-weights, full-data refits and nested cross-validation.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{FeatureMatrix, Scaler};
use crate::error::{Error, Result};
use crate::learners::{self, Family, Fitted, LearnerKind, LearnerModel, LearnerSpec};
use crate::metrics::mse_risk;
use crate::seed;
use crate::simplex::{simplex_risk, solve_simplex_weights};

pub const DEFAULT_FOLDS: usize = 10;

/// Seeded assignment of `n` rows to `v` folds whose sizes differ by at most one.
pub fn fold_assignment(n: usize, v: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let mut folds = vec![0; n];
    for (k, &row) in perm.iter().enumerate() {
        folds[row] = k % v;
    }
    folds
}

fn check_cv(library: &[LearnerSpec], n: usize, v: usize) -> Result<()> {
    if library.is_empty() {
        return Err(Error::argument("learner library is empty"));
    }
    if v < 2 {
        return Err(Error::argument(format!("need at least 2 folds, got {v}")));
    }
    if n < v {
        return Err(Error::data(format!("{n} rows cannot fill {v} folds")));
    }
    let mut names: Vec<&str> = library.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::argument(format!("learner name {:?} appears twice", w[0])));
    }
    Ok(())
}

fn with_family(library: &[LearnerSpec], family: Family) -> Vec<LearnerSpec> {
    library.iter().map(|s| s.clone().with_family(family)).collect()
}

/// Out-of-fold predictions of every library member.
#[derive(Debug, Clone)]
pub struct LevelOneMatrix {
    /// `n x L`; entry `(i, l)` comes from learner `l` fitted without row `i`'s fold.
    pub z: DMatrix<f64>,
    pub folds: Vec<usize>,
    pub fold_count: usize,
    pub library: Vec<LearnerSpec>,
    /// `(fold, learner)` pairs whose fit failed and were replaced by the mean.
    pub substituted: Vec<(usize, usize)>,
}

impl LevelOneMatrix {
    /// Cross-validated risk of each learner.
    pub fn learner_risks(&self, y: &[f64]) -> Vec<f64> {
        (0..self.z.ncols())
            .map(|l| mse_risk(self.z.column(l).as_slice(), y).unwrap_or(f64::INFINITY))
            .collect()
    }
}

/// Fits `spec` on the rows of `train` and scores the rows of `held_out`,
/// substituting the training mean if the learner fails.
fn fit_and_score(
    spec: &LearnerSpec,
    x: &FeatureMatrix,
    y: &[f64],
    train: &[usize],
    held_out: &[usize],
) -> (Vec<f64>, bool) {
    let x_train = x.select_rows(train);
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let x_test = x.select_rows(held_out);
    match learners::train(spec, &x_train, &y_train).and_then(|m| m.predict(&x_test)) {
        Ok(p) if p.iter().all(|v| v.is_finite()) => (p, false),
        outcome => {
            let why = match outcome {
                Err(e) => e.to_string(),
                Ok(_) => "non-finite predictions".to_string(),
            };
            warn!(
                "learner {} failed ({why}); using the mean learner for this fold",
                spec.name
            );
            let mean = y_train.iter().sum::<f64>() / y_train.len().max(1) as f64;
            (vec![mean; held_out.len()], true)
        }
    }
}

/// Builds the level-one matrix with `v`-fold cross-validation.
pub fn build_level_one(
    library: &[LearnerSpec],
    x: &FeatureMatrix,
    y: &[f64],
    v: usize,
    seed: u64,
) -> Result<LevelOneMatrix> {
    let n = x.n_rows();
    check_cv(library, n, v)?;
    if y.len() != n {
        return Err(Error::argument(format!("{n} rows but {} targets", y.len())));
    }
    let folds = fold_assignment(n, v, seed);
    let members: Vec<(Vec<usize>, Vec<usize>)> = (0..v)
        .map(|f| {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
            (train, held)
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..v)
        .flat_map(|f| (0..library.len()).map(move |l| (f, l)))
        .collect();
    let results: Vec<(Vec<f64>, bool)> = tasks
        .par_iter()
        .map(|&(f, l)| fit_and_score(&library[l], x, y, &members[f].0, &members[f].1))
        .collect();

    let mut z = DMatrix::zeros(n, library.len());
    let mut substituted = Vec::new();
    for (&(f, l), (pred, failed)) in tasks.iter().zip(results) {
        for (&row, p) in members[f].1.iter().zip(pred) {
            z[(row, l)] = p;
        }
        if failed {
            substituted.push((f, l));
        }
    }
    Ok(LevelOneMatrix {
        z,
        folds,
        fold_count: v,
        library: library.to_vec(),
        substituted,
    })
}

/// A fitted stacking ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperLearnerModel {
    /// Label used in reports and file names, e.g. `SL1`.
    pub name: String,
    pub family: Family,
    pub library: Vec<LearnerSpec>,
    /// Simplex weights aligned with `library`.
    pub weights: Vec<f64>,
    /// Cross-validated risk of each library member.
    pub cv_risks: Vec<f64>,
    /// Library members refitted on all training rows.
    pub models: Vec<LearnerModel>,
    pub features: Vec<String>,
    pub scaler: Option<Scaler>,
    pub folds: usize,
    pub seed: u64,
}

/// Fits the ensemble: level-one matrix, simplex weights, full-data refits.
pub fn fit_super_learner(
    library: &[LearnerSpec],
    x: &FeatureMatrix,
    y: &[f64],
    family: Family,
    v: usize,
    seed: u64,
) -> Result<SuperLearnerModel> {
    let library = with_family(library, family);
    let level_one = build_level_one(&library, x, y, v, seed)?;
    let weights = solve_simplex_weights(&level_one.z, y);
    let cv_risks = level_one.learner_risks(y);

    let models: Vec<LearnerModel> = library
        .par_iter()
        .map(|spec| match learners::train(spec, x, y) {
            Ok(m) => m,
            Err(e) => {
                warn!(
                    "learner {} failed on the full data ({e}); using the mean learner",
                    spec.name
                );
                LearnerModel {
                    spec: LearnerSpec::new(spec.name.clone(), LearnerKind::Mean).with_family(family),
                    features: x.columns().to_vec(),
                    fitted: Fitted::Mean(y.iter().sum::<f64>() / y.len() as f64),
                }
            }
        })
        .collect();

    Ok(SuperLearnerModel {
        name: "SuperLearner".to_string(),
        family,
        library,
        weights,
        cv_risks,
        models,
        features: x.columns().to_vec(),
        scaler: None,
        folds: v,
        seed,
    })
}

impl SuperLearnerModel {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    /// Index of the library member with the lowest cross-validated risk.
    pub fn discrete_choice(&self) -> usize {
        (0..self.cv_risks.len())
            .min_by(|&a, &b| self.cv_risks[a].total_cmp(&self.cv_risks[b]).then(a.cmp(&b)))
            .unwrap_or(0)
    }

    /// Per-member predictions on already-scaled `x`.
    pub fn member_predictions(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_columns(x)?;
        self.models.iter().map(|m| m.predict(x)).collect()
    }

    fn check_columns(&self, x: &FeatureMatrix) -> Result<()> {
        if x.columns() != self.features.as_slice() {
            return Err(Error::argument(format!(
                "model {} expects columns {:?}, got {:?}",
                self.name,
                self.features,
                x.columns()
            )));
        }
        Ok(())
    }

    /// Weighted sum of member predictions.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        let mut out = vec![0.0; x.n_rows()];
        for (m, &w) in self.models.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(m.predict(x)?) {
                *o += w * p;
            }
        }
        if self.family == Family::Binomial {
            out.iter_mut().for_each(|o| *o = o.clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

pub fn predict_ensemble(model: &SuperLearnerModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}

pub const ENSEMBLE_METHOD: &str = "SuperLearner";
pub const DISCRETE_METHOD: &str = "DiscreteSL";

/// Held-out risks from nested cross-validation of the whole procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// `SuperLearner`, `DiscreteSL`, then each library member by name.
    pub methods: Vec<String>,
    /// `risks[m][f]`: risk of method `m` on outer fold `f`.
    pub risks: Vec<Vec<f64>>,
    /// Library member picked by the discrete Super Learner in each fold.
    pub discrete_choices: Vec<String>,
}

impl CvReport {
    pub fn fold_count(&self) -> usize {
        self.risks.first().map_or(0, Vec::len)
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == name)
    }

    pub fn mean_risk(&self, m: usize) -> f64 {
        let r = &self.risks[m];
        r.iter().sum::<f64>() / r.len() as f64
    }

    /// Standard error of the mean fold risk.
    pub fn std_error(&self, m: usize) -> f64 {
        let r = &self.risks[m];
        let v = r.len();
        if v < 2 {
            return 0.0;
        }
        let mean = self.mean_risk(m);
        let var = r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v - 1) as f64;
        (var / v as f64).sqrt()
    }

    /// `method,fold,risk` rows; folds are numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,fold,risk\n");
        for (m, name) in self.methods.iter().enumerate() {
            for (f, r) in self.risks[m].iter().enumerate() {
                out.push_str(&format!("{name},{},{r}\n", f + 1));
            }
        }
        out
    }
}

/// Evaluates the ensemble, the discrete Super Learner and every library
/// member on `v_outer` held-out folds, fitting a full Super Learner with
/// `v_inner` folds on each complement.
pub fn cross_validate_ensemble(
    library: &[LearnerSpec],
    x: &FeatureMatrix,
    y: &[f64],
    family: Family,
    v_outer: usize,
    v_inner: usize,
    seed: u64,
) -> Result<CvReport> {
    let n = x.n_rows();
    check_cv(library, n, v_outer)?;
    let folds = fold_assignment(n, v_outer, seed);

    let per_fold: Vec<Result<(Vec<f64>, String)>> = (0..v_outer)
        .into_par_iter()
        .map(|f| {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
            let x_train = x.select_rows(&train);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let x_held = x.select_rows(&held);
            let y_held: Vec<f64> = held.iter().map(|&i| y[i]).collect();

            let sl = fit_super_learner(
                library,
                &x_train,
                &y_train,
                family,
                v_inner,
                seed::derive(seed, f as u64 + 1),
            )?;
            let members = sl.member_predictions(&x_held)?;
            let ensemble = sl.predict(&x_held)?;
            let discrete = sl.discrete_choice();

            let mut risks = vec![
                mse_risk(&ensemble, &y_held)?,
                mse_risk(&members[discrete], &y_held)?,
            ];
            for p in &members {
                risks.push(mse_risk(p, &y_held)?);
            }
            Ok((risks, sl.library[discrete].name.clone()))
        })
        .collect();

    let mut methods = vec![ENSEMBLE_METHOD.to_string(), DISCRETE_METHOD.to_string()];
    methods.extend(library.iter().map(|s| s.name.clone()));
    let mut risks = vec![Vec::with_capacity(v_outer); methods.len()];
    let mut discrete_choices = Vec::with_capacity(v_outer);
    for fold in per_fold {
        let (r, choice) = fold?;
        for (m, v) in r.into_iter().enumerate() {
            risks[m].push(v);
        }
        discrete_choices.push(choice);
    }
    Ok(CvReport {
        methods,
        risks,
        discrete_choices,
    })
}

/// Level-one risk of the weighted combination; equals the objective the
/// weights minimize.
pub fn level_one_risk(level_one: &LevelOneMatrix, y: &[f64], weights: &[f64]) -> f64 {
    simplex_risk(&level_one.z, y, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![((i * 37) % 17) as f64, ((i * 11) % 7) as f64])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| f64::from(u8::from(r[0] + 2.0 * r[1] > 14.0)))
            .collect();
        let labels = y.iter().map(|&v| v as u8).collect();
        let m = FeatureMatrix::from_rows(
            (0..n).map(|i| format!("r{i}")).collect(),
            vec!["a".into(), "b".into()],
            &rows,
            labels,
            vec![None; n],
        )
        .unwrap();
        (m, y)
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(23, 5, 1);
        let mut sizes = [0; 5];
        for &k in &f {
            sizes[k] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(f, fold_assignment(23, 5, 1));
    }

    #[test]
    fn leave_one_out_mean() {
        let (x, _) = data(2);
        let lib = [LearnerSpec::new("mean", LearnerKind::Mean)];
        let l1 = build_level_one(&lib, &x, &[0.0, 1.0], 2, 0).unwrap();
        assert_eq!(l1.z.column(0).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn mean_column_is_fold_excluded_mean() {
        let (x, y) = data(30);
        let lib = [LearnerSpec::new("mean", LearnerKind::Mean)];
        let l1 = build_level_one(&lib, &x, &y, 5, 3).unwrap();
        for i in 0..30 {
            let others: Vec<f64> = (0..30)
                .filter(|&j| l1.folds[j] != l1.folds[i])
                .map(|j| y[j])
                .collect();
            let m = others.iter().sum::<f64>() / others.len() as f64;
            assert!((l1.z[(i, 0)] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn argument_errors() {
        let (x, y) = data(5);
        let lib = [LearnerSpec::new("mean", LearnerKind::Mean)];
        assert!(build_level_one(&lib, &x, &y, 1, 0).is_err());
        assert!(build_level_one(&lib, &x, &y, 6, 0).is_err());
        assert!(build_level_one(&[], &x, &y, 2, 0).is_err());
        let dup = [lib[0].clone(), lib[0].clone()];
        assert!(build_level_one(&dup, &x, &y, 2, 0).is_err());
    }

    #[test]
    fn failing_learner_is_replaced_by_mean() {
        let (x, y) = data(20);
        let mut bad = LearnerSpec::new("bad", LearnerKind::RandomForest);
        bad.tree_count = 0;
        let l1 = build_level_one(&[bad], &x, &y, 4, 0).unwrap();
        assert_eq!(l1.substituted.len(), 4);
        assert!(l1.z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mean_only_library() {
        let (x, y) = data(40);
        let lib = [LearnerSpec::new("mean", LearnerKind::Mean)];
        let sl = fit_super_learner(&lib, &x, &y, Family::Binomial, 5, 0).unwrap();
        assert_eq!(sl.weights, vec![1.0]);
        let p = sl.predict(&x).unwrap();
        let mean = y.iter().sum::<f64>() / 40.0;
        assert!(p.iter().all(|&v| (v - mean).abs() < 1e-12));

        let rep = cross_validate_ensemble(&lib, &x, &y, Family::Binomial, 4, 3, 0).unwrap();
        assert_eq!(rep.fold_count(), 4);
        assert_eq!(rep.risks[0], rep.risks[2]);
    }

    #[test]
    fn weights_pick_out_predictions() {
        let (x, y) = data(40);
        let lib = [
            LearnerSpec::new("mean", LearnerKind::Mean),
            LearnerSpec::new("tree", LearnerKind::Tree),
        ];
        let mut sl = fit_super_learner(&lib, &x, &y, Family::Binomial, 5, 0).unwrap();
        let members = sl.member_predictions(&x).unwrap();
        sl.weights = vec![1.0, 0.0];
        assert_eq!(sl.predict(&x).unwrap(), members[0]);
        sl.weights = vec![0.5, 0.5];
        let avg: Vec<f64> = members[0]
            .iter()
            .zip(&members[1])
            .map(|(a, b)| 0.5 * a + 0.5 * b)
            .collect();
        assert_eq!(sl.predict(&x).unwrap(), avg);
        assert!(sl.predict(&x.without_columns()).is_err());
    }
}
