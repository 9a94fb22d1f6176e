//! `sociobot`: generate synthetic corpora, extract ego-network features, fit
//! and evaluate Super Learner ensembles.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 environment error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use sociobot_core::corpus::{load_manifest, read_feature_csv, write_feature_csv};
use sociobot_core::error::{Error, Result};
use sociobot_core::model_io::{load_model, save_model};
use sociobot_core::pipeline::{self, Evaluation, Formula};
use sociobot_core::synth::generate_corpus;
use sociobot_core::Config;

#[derive(Parser)]
#[command(
    name = "sociobot",
    version,
    about = "Ego-network bot classification experiments"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus: manifest.csv plus one edge list per record.
    Generate {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Records of a profile kind, e.g. --count bot_clone=3 (repeatable).
        #[arg(long = "count", value_name = "KIND=N")]
        counts: Vec<String>,
        /// Standard deviation of the synthetic score noise.
        #[arg(long)]
        score_noise_sd: Option<f64>,
        /// Probability that a synthetic score targets the wrong label.
        #[arg(long)]
        score_flip_prob: Option<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Measure every network of a manifest into a feature CSV.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Feature CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit one formula on every row of a feature CSV and save the model.
    Train {
        /// Feature CSV (unscaled) as written by `extract`.
        #[arg(long)]
        features: PathBuf,
        /// SL1, SL2, SL3 or SL4.
        #[arg(long)]
        formula: String,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a feature CSV with a saved model and report its measures.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Directory for metrics, predictions and curve files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full experiment: features, 80/20 split, all formulas, test metrics.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Nested cross-validation of the ensemble against every learner.
    Cv {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Configuration sources, applied in order: built-in defaults, `--config`
/// file, `--set` pairs, then the dedicated flags.
#[derive(Args)]
struct ConfigArgs {
    /// Configuration file in key = value format.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override any configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Core order of the k-core reduction.
    #[arg(long)]
    k: Option<usize>,
    /// Super Learner folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Outer folds of the cross-validated ensemble check.
    #[arg(long)]
    outer_folds: Option<usize>,
    #[arg(long)]
    split_ratio: Option<f64>,
    /// Classification threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma list of formulas, e.g. SL1,SL4.
    #[arg(long)]
    formulas: Option<String>,
    /// Comma list of learner names.
    #[arg(long)]
    library: Option<String>,
    /// Split within each label.
    #[arg(long)]
    stratified: bool,
    /// Exclude records without an external score from score-based formulas.
    #[arg(long)]
    drop_missing_scores: bool,
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .ok_or_else(|| Error::Argument(format!("expected KEY=VALUE, found {s:?}")))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        for pair in &self.set {
            let (k, v) = split_pair(pair)?;
            c.set(k, v)?;
        }
        let flags: [(&str, Option<String>); 8] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("folds", self.folds.map(|v| v.to_string())),
            ("outer_folds", self.outer_folds.map(|v| v.to_string())),
            ("split_ratio", self.split_ratio.map(|v| v.to_string())),
            ("threshold", self.threshold.map(|v| v.to_string())),
            ("formulas", self.formulas.clone()),
            ("library", self.library.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        if self.stratified {
            c.stratified = true;
        }
        if self.drop_missing_scores {
            c.drop_missing_scores = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_table(evaluations: &[Evaluation]) {
    println!(
        "{:<5} {:<26} {:>7} {:>7} {:>9} {:>7} {:>7} {:>7}",
        "model", "formula", "auc", "bal_acc", "precision", "recall", "f1", "mse"
    );
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    for e in evaluations {
        let r = e.report.as_ref();
        println!(
            "{:<5} {:<26} {:>7} {:>7} {:>9} {:>7} {:>7} {:>7.4}",
            e.formula.name(),
            e.formula.describe(),
            cell(r.and_then(|r| r.auc)),
            cell(r.map(|r| r.balanced_accuracy)),
            cell(r.map(|r| r.precision)),
            cell(r.map(|r| r.recall)),
            cell(r.map(|r| r.f1)),
            e.mse
        );
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            out,
            counts,
            score_noise_sd,
            score_flip_prob,
            config,
        } => {
            let mut c = config.resolve()?;
            for pair in &counts {
                let (kind, n) = split_pair(pair)?;
                c.set(&format!("count.{kind}"), n)?;
            }
            if let Some(v) = score_noise_sd {
                c.synth.score_noise_sd = v;
            }
            if let Some(v) = score_flip_prob {
                c.synth.score_flip_prob = v;
            }
            create_dir(&out)?;
            let manifest = generate_corpus(&c.synth, &out)?;
            println!("{}", manifest.display());
        }
        Command::Extract {
            manifest,
            out,
            config,
        } => {
            let c = config.resolve()?;
            let records = load_manifest(&manifest)?;
            let m = pipeline::extract_features(&records, c.k)?;
            write_feature_csv(&out, &m)?;
            info!("wrote {} rows to {}", m.n_rows(), out.display());
        }
        Command::Train {
            features,
            formula,
            out,
            config,
        } => {
            let c = config.resolve()?;
            let formula: Formula = formula.parse()?;
            let m = read_feature_csv(&features)?;
            let rows = pipeline::usable_rows(formula, &m, c.drop_missing_scores)?;
            let model = pipeline::fit_formula(formula, &m.select_rows(&rows), &c)?;
            save_model(&out, &model)?;
            for ((spec, w), r) in model.library.iter().zip(&model.weights).zip(&model.cv_risks) {
                println!("{:<16} weight {w:.4} cv_risk {r:.4}", spec.name);
            }
        }
        Command::Evaluate {
            model,
            features,
            out,
            config,
        } => {
            let c = config.resolve()?;
            let model = load_model(&model)?;
            let formula = Formula::of_model(&model);
            let m = read_feature_csv(&features)?;
            let rows = pipeline::usable_rows(formula, &m, c.drop_missing_scores)?;
            let e = pipeline::evaluate(&model, formula, &m.select_rows(&rows), c.threshold)?;
            if let Some(dir) = out {
                create_dir(&dir)?;
                let evals = std::slice::from_ref(&e);
                write_text(&dir.join("metrics.csv"), &pipeline::metrics_csv(evals))?;
                write_text(&dir.join("comparison.csv"), &pipeline::comparison_csv(evals))?;
                pipeline::write_evaluation(&e, &dir)?;
            }
            print_table(std::slice::from_ref(&e));
        }
        Command::Pipeline {
            manifest,
            out,
            config,
        } => {
            let c = config.resolve()?;
            create_dir(&out)?;
            write_text(&out.join("config.conf"), &c.to_text())?;
            let result = pipeline::run_pipeline(&manifest, &c, &out)?;
            print_table(&result.evaluations);
        }
        Command::Cv {
            manifest,
            out,
            config,
        } => {
            let c = config.resolve()?;
            create_dir(&out)?;
            write_text(&out.join("config.conf"), &c.to_text())?;
            let reports = pipeline::run_cv(&manifest, &c, &out)?;
            print!("{}", pipeline::cv_summary_csv(&reports));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        Error::Io { .. } => 3,
        Error::Parse { .. } | Error::Data(_) | Error::UndefinedMetric(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
