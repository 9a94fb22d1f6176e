//! End-to-end experiment: features, split, four model formulas, evaluation.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::Config;
use crate::corpus::{
    find_duplicates, load_manifest, split_indices, write_feature_csv, CorpusRecord, FeatureMatrix, Scaler,
};
use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, EgoNetwork};
use crate::learners::Family;
use crate::measures::{feature_names, feature_vector};
use crate::metrics::{classification_summary, mse_risk, CurvePoint, MetricsReport};
use crate::model_io::save_model;
use crate::super_learner::{cross_validate_ensemble, fit_super_learner, CvReport, SuperLearnerModel};

/// Name of the predictor column that carries the external score.
pub const SCORE_COLUMN: &str = "score";

/// The four model formulas compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    /// label ~ network features
    Sl1,
    /// score ~ network features
    Sl2,
    /// label ~ score
    Sl3,
    /// label ~ network features + score
    Sl4,
}

impl Formula {
    pub const ALL: [Formula; 4] = [Formula::Sl1, Formula::Sl2, Formula::Sl3, Formula::Sl4];

    pub fn name(self) -> &'static str {
        match self {
            Formula::Sl1 => "SL1",
            Formula::Sl2 => "SL2",
            Formula::Sl3 => "SL3",
            Formula::Sl4 => "SL4",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Formula::Sl1 => "label ~ features",
            Formula::Sl2 => "score ~ features",
            Formula::Sl3 => "label ~ score",
            Formula::Sl4 => "label ~ features + score",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Formula::Sl2 => Family::Gaussian,
            _ => Family::Binomial,
        }
    }

    pub fn needs_scores(self) -> bool {
        self != Formula::Sl1
    }

    fn uses_features(self) -> bool {
        self != Formula::Sl3
    }

    fn uses_score_predictor(self) -> bool {
        matches!(self, Formula::Sl3 | Formula::Sl4)
    }

    /// Outcome vector for rows that have every value the formula needs.
    pub fn outcome(self, m: &FeatureMatrix) -> Vec<f64> {
        match self {
            Formula::Sl2 => m.scores().iter().map(|s| s.expect("scored rows only")).collect(),
            _ => m.labels_f64(),
        }
    }
}

impl Formula {
    /// The formula a stored model was fitted for, read from its family and
    /// predictor columns.
    pub fn of_model(model: &SuperLearnerModel) -> Formula {
        let has_score = model.features.iter().any(|f| f == SCORE_COLUMN);
        match (model.family, has_score) {
            (Family::Gaussian, _) => Formula::Sl2,
            (Family::Binomial, true) if model.features.len() == 1 => Formula::Sl3,
            (Family::Binomial, true) => Formula::Sl4,
            (Family::Binomial, false) => Formula::Sl1,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::argument(format!("unknown formula {s:?}; expected SL1, SL2, SL3 or SL4")))
    }
}

/// Reads and measures every record's network, in manifest order.
pub fn extract_features(records: &[CorpusRecord], k: usize) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| {
            let text = std::fs::read_to_string(&r.network_path).map_err(|e| Error::io(&r.network_path, e))?;
            let net = parse_edge_list(&text).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", r.network_path.display()),
                },
                Error::Data(m) => Error::Data(format!("{}: {m}", r.network_path.display())),
                other => other,
            })?;
            Ok(feature_vector(&net, k).into_values())
        })
        .collect::<Result<_>>()?;
    matrix_from(records, &rows)
}

/// Measures networks already in memory.
pub fn features_from_networks(items: &[(CorpusRecord, EgoNetwork)], k: usize) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = items
        .par_iter()
        .map(|(_, net)| feature_vector(net, k).into_values())
        .collect();
    let records: Vec<CorpusRecord> = items.iter().map(|(r, _)| r.clone()).collect();
    matrix_from(&records, &rows)
}

fn matrix_from(records: &[CorpusRecord], rows: &[Vec<f64>]) -> Result<FeatureMatrix> {
    FeatureMatrix::from_rows(
        records.iter().map(|r| r.id.clone()).collect(),
        feature_names(),
        rows,
        records.iter().map(|r| r.label).collect(),
        records.iter().map(|r| r.external_score).collect(),
    )
}

/// Row indices usable for `formula`: all rows, or only scored ones. Unscored
/// rows are an error unless `drop_missing` is set.
pub fn usable_rows(formula: Formula, m: &FeatureMatrix, drop_missing: bool) -> Result<Vec<usize>> {
    if !formula.needs_scores() {
        return Ok((0..m.n_rows()).collect());
    }
    let scored = m.scored_rows();
    if scored.len() < m.n_rows() {
        let missing: Vec<&str> = (0..m.n_rows())
            .filter(|&i| m.scores()[i].is_none())
            .map(|i| m.ids()[i].as_str())
            .collect();
        let shown = missing.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        let more = if missing.len() > 10 {
            format!(" and {} more", missing.len() - 10)
        } else {
            String::new()
        };
        if !drop_missing {
            return Err(Error::data(format!(
                "{formula} needs external scores; missing for {shown}{more} (set drop_missing_scores to exclude them)"
            )));
        }
        warn!(
            "{formula}: excluding {} records without an external score: {shown}{more}",
            missing.len()
        );
    }
    Ok(scored)
}

/// Predictor matrix of `formula` from unscaled features: network columns
/// standardized by `scaler`, the raw score appended when used.
pub fn design(formula: Formula, m: &FeatureMatrix, scaler: Option<&Scaler>) -> Result<FeatureMatrix> {
    let base = if formula.uses_features() {
        let scaler = scaler.ok_or_else(|| Error::argument(format!("{formula} needs a fitted scaler")))?;
        scaler.apply(&m.select_columns(&scaler.columns)?)?
    } else {
        m.without_columns()
    };
    if formula.uses_score_predictor() {
        let scores: Vec<f64> = m.scores().iter().map(|s| s.expect("scored rows only")).collect();
        base.with_column(SCORE_COLUMN, &scores)
    } else {
        Ok(base)
    }
}

/// Predictor matrix for a stored model: the model's scaler on its network
/// columns, plus the raw score when the model was trained on it.
pub fn design_for_model(model: &SuperLearnerModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let base = match &model.scaler {
        Some(s) => s.apply(&m.select_columns(&s.columns)?)?,
        None => m.without_columns(),
    };
    let full = if model.features.iter().any(|f| f == SCORE_COLUMN) {
        if let Some(i) = m.scores().iter().position(Option::is_none) {
            return Err(Error::data(format!(
                "model {} uses the external score, which record {} lacks",
                model.name,
                m.ids()[i]
            )));
        }
        let scores: Vec<f64> = m.scores().iter().map(|s| s.unwrap()).collect();
        base.with_column(SCORE_COLUMN, &scores)?
    } else {
        base
    };
    full.select_columns(&model.features)
}

/// Fits one formula on an unscaled training matrix.
pub fn fit_formula(formula: Formula, train: &FeatureMatrix, config: &Config) -> Result<SuperLearnerModel> {
    let scaler = Scaler::fit(train);
    let x = design(formula, train, Some(&scaler))?;
    let y = formula.outcome(train);
    let model = fit_super_learner(
        &config.learners()?,
        &x,
        &y,
        formula.family(),
        config.folds,
        crate::seed::derive(config.seed, 100 + formula as u64),
    )?
    .with_name(formula.name());
    Ok(if formula.uses_features() {
        model.with_scaler(scaler)
    } else {
        model
    })
}

/// Test-set evaluation of one fitted formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub formula: Formula,
    pub n_train: usize,
    pub n_test: usize,
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub scores: Vec<Option<f64>>,
    pub predictions: Vec<f64>,
    /// Classification measures; absent for the score regression.
    pub report: Option<MetricsReport>,
    /// Mean squared error against the outcome.
    pub mse: f64,
}

pub fn evaluate(
    model: &SuperLearnerModel,
    formula: Formula,
    test: &FeatureMatrix,
    threshold: f64,
) -> Result<Evaluation> {
    let x = design_for_model(model, test)?;
    let predictions = model.predict(&x)?;
    let y = formula.outcome(test);
    let mse = mse_risk(&predictions, &y)?;
    let report = match formula.family() {
        Family::Binomial => Some(classification_summary(&predictions, test.labels(), threshold)?),
        Family::Gaussian => None,
    };
    Ok(Evaluation {
        formula,
        n_train: 0,
        n_test: test.n_rows(),
        ids: test.ids().to_vec(),
        labels: test.labels().to_vec(),
        scores: test.scores().to_vec(),
        predictions,
        report,
        mse,
    })
}

/// Fitted models and their test-set evaluations.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub features: FeatureMatrix,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub duplicates: Vec<Vec<String>>,
    pub models: Vec<SuperLearnerModel>,
    pub evaluations: Vec<Evaluation>,
}

impl PipelineResult {
    pub fn evaluation(&self, formula: Formula) -> Option<&Evaluation> {
        self.evaluations.iter().find(|e| e.formula == formula)
    }

    pub fn auc(&self, formula: Formula) -> Option<f64> {
        self.evaluation(formula)?.report.as_ref()?.auc
    }
}

/// Splits, fits every configured formula and evaluates on the test rows.
pub fn run_on_features(features: FeatureMatrix, config: &Config) -> Result<PipelineResult> {
    config.validate()?;
    let duplicates = find_duplicates(&features);
    if !duplicates.is_empty() {
        warn!(
            "{} groups of records share identical measures ({} records)",
            duplicates.len(),
            duplicates.iter().map(Vec::len).sum::<usize>()
        );
    }
    let (train, test) = split_indices(
        features.labels(),
        config.split_ratio,
        config.seed,
        config.stratified,
    )?;
    let mut models = Vec::new();
    let mut evaluations = Vec::new();
    for &formula in &config.formulas {
        let rows = usable_rows(formula, &features, config.drop_missing_scores)?;
        let keep = |idx: &[usize]| -> Vec<usize> {
            idx.iter()
                .copied()
                .filter(|i| rows.binary_search(i).is_ok())
                .collect()
        };
        let (tr, te) = (keep(&train), keep(&test));
        if tr.len() < config.folds {
            return Err(Error::data(format!(
                "{formula}: {} training rows cannot fill {} folds",
                tr.len(),
                config.folds
            )));
        }
        if te.is_empty() {
            return Err(Error::data(format!("{formula}: no test rows")));
        }
        let train_m = features.select_rows(&tr);
        let test_m = features.select_rows(&te);
        info!("fitting {formula} ({}) on {} rows", formula.describe(), tr.len());
        let model = fit_formula(formula, &train_m, config)?;
        let mut eval = evaluate(&model, formula, &test_m, config.threshold)?;
        eval.n_train = tr.len();
        models.push(model);
        evaluations.push(eval);
    }
    Ok(PipelineResult {
        features,
        train,
        test,
        duplicates,
        models,
        evaluations,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,x,y\n");
    for p in points {
        writeln!(out, "{},{},{}", p.threshold, p.x, p.y).unwrap();
    }
    out
}

/// `model,formula,family,n_train,n_test,auc,balanced_accuracy,precision,recall,f1,mse`;
/// classification cells are empty for the score regression.
pub fn comparison_csv(evaluations: &[Evaluation]) -> String {
    let mut out =
        String::from("model,formula,family,n_train,n_test,auc,balanced_accuracy,precision,recall,f1,mse\n");
    for e in evaluations {
        let r = e.report.as_ref();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.formula,
            e.formula.describe(),
            e.formula.family(),
            e.n_train,
            e.n_test,
            fmt_opt(r.and_then(|r| r.auc)),
            fmt_opt(r.map(|r| r.balanced_accuracy)),
            fmt_opt(r.map(|r| r.precision)),
            fmt_opt(r.map(|r| r.recall)),
            fmt_opt(r.map(|r| r.f1)),
            e.mse
        )
        .unwrap();
    }
    out
}

/// Long-form `model,measure,value` rows.
pub fn metrics_csv(evaluations: &[Evaluation]) -> String {
    let mut out = String::from("model,measure,value\n");
    for e in evaluations {
        let mut row = |measure: &str, v: f64| writeln!(out, "{},{measure},{v}", e.formula).unwrap();
        match &e.report {
            Some(r) => {
                if let Some(auc) = r.auc {
                    row("auc", auc);
                }
                row("balanced_accuracy", r.balanced_accuracy);
                row("precision", r.precision);
                row("recall", r.recall);
                row("f1", r.f1);
                row("mse", e.mse);
            }
            None => row("mse", e.mse),
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes every output of a pipeline run under `out_dir`.
pub fn write_outputs(result: &PipelineResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let models_dir = out_dir.join("models");
    create_dir(&models_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = out_dir.join(name);
        write(&p, &text)?;
        written.push(p);
        Ok(())
    };

    let f = &result.features;
    let mut split = String::from("id,set\n");
    let mut set = vec![""; f.n_rows()];
    result.train.iter().for_each(|&i| set[i] = "train");
    result.test.iter().for_each(|&i| set[i] = "test");
    for (id, s) in f.ids().iter().zip(&set) {
        writeln!(split, "{id},{s}").unwrap();
    }
    put("split.csv", split)?;

    let mut dups = String::from("group,id\n");
    for (g, ids) in result.duplicates.iter().enumerate() {
        for id in ids {
            writeln!(dups, "{},{id}", g + 1).unwrap();
        }
    }
    put("duplicates.csv", dups)?;
    put("comparison.csv", comparison_csv(&result.evaluations))?;
    put("metrics.csv", metrics_csv(&result.evaluations))?;
    for e in &result.evaluations {
        written.extend(write_evaluation(e, out_dir)?);
    }
    for (model, e) in result.models.iter().zip(&result.evaluations) {
        let name = e.formula.name();
        let mut lib = String::from("learner,cv_risk,weight\n");
        for ((spec, risk), w) in model.library.iter().zip(&model.cv_risks).zip(&model.weights) {
            writeln!(lib, "{},{risk},{w}", spec.name).unwrap();
        }
        let p = out_dir.join(format!("library_{name}.csv"));
        write(&p, &lib)?;
        written.push(p);
        let p = models_dir.join(format!("{name}.model"));
        save_model(&p, model)?;
        written.push(p);
    }
    Ok(written)
}

/// Writes `predictions_<model>.csv` and, for classifiers, the
/// `roc_<model>.csv` and `pr_<model>.csv` curve points.
pub fn write_evaluation(e: &Evaluation, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let name = e.formula.name();
    let mut files = vec![(format!("predictions_{name}.csv"), {
        let mut preds = String::from("id,label,score,prediction\n");
        for i in 0..e.ids.len() {
            writeln!(
                preds,
                "{},{},{},{}",
                e.ids[i],
                e.labels[i],
                fmt_opt(e.scores[i]),
                e.predictions[i]
            )
            .unwrap();
        }
        preds
    })];
    if let Some(r) = &e.report {
        files.push((format!("roc_{name}.csv"), curve_csv(&r.roc_points)));
        files.push((format!("pr_{name}.csv"), curve_csv(&r.pr_points)));
    }
    files
        .into_iter()
        .map(|(file, text)| {
            let p = out_dir.join(file);
            write(&p, &text)?;
            Ok(p)
        })
        .collect()
}

/// Full experiment from a manifest: features, fits, evaluation, outputs.
pub fn run_pipeline(manifest: &Path, config: &Config, out_dir: &Path) -> Result<PipelineResult> {
    config.validate()?;
    let records = load_manifest(manifest)?;
    info!(
        "extracting features for {} records (k = {})",
        records.len(),
        config.k
    );
    let features = extract_features(&records, config.k)?;
    let result = run_on_features(features, config)?;
    create_dir(out_dir)?;
    write_feature_csv(&out_dir.join("features.csv"), &result.features)?;
    write_outputs(&result, out_dir)?;
    Ok(result)
}

/// Nested cross-validation of every configured formula over all rows.
pub fn cv_on_features(features: &FeatureMatrix, config: &Config) -> Result<Vec<(Formula, CvReport)>> {
    config.validate()?;
    let library = config.learners()?;
    config
        .formulas
        .iter()
        .map(|&formula| {
            let rows = usable_rows(formula, features, config.drop_missing_scores)?;
            let m = features.select_rows(&rows);
            let scaler = Scaler::fit(&m);
            let x = design(formula, &m, Some(&scaler))?;
            let y = formula.outcome(&m);
            info!("cross-validating {formula} on {} rows", m.n_rows());
            let report = cross_validate_ensemble(
                &library,
                &x,
                &y,
                formula.family(),
                config.outer_folds,
                config.folds,
                crate::seed::derive(config.seed, 200 + formula as u64),
            )?;
            Ok((formula, report))
        })
        .collect()
}

/// `model,method,mean_risk,std_error` over all formulas.
pub fn cv_summary_csv(reports: &[(Formula, CvReport)]) -> String {
    let mut out = String::from("model,method,mean_risk,std_error\n");
    for (formula, r) in reports {
        for (m, name) in r.methods.iter().enumerate() {
            writeln!(out, "{formula},{name},{},{}", r.mean_risk(m), r.std_error(m)).unwrap();
        }
    }
    out
}

/// Nested cross-validation from a manifest; writes `cv_<model>.csv` files
/// and `cv_summary.csv`.
pub fn run_cv(manifest: &Path, config: &Config, out_dir: &Path) -> Result<Vec<(Formula, CvReport)>> {
    config.validate()?;
    let records = load_manifest(manifest)?;
    let features = extract_features(&records, config.k)?;
    let reports = cv_on_features(&features, config)?;
    create_dir(out_dir)?;
    for (formula, r) in &reports {
        write(&out_dir.join(format!("cv_{formula}.csv")), &r.to_csv())?;
    }
    write(&out_dir.join("cv_summary.csv"), &cv_summary_csv(&reports))?;
    Ok(reports)
}
