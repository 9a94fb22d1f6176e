//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; the process fails if any check
//! fails. A command-line word filters checks by name.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use sociobot_core::corpus::{find_duplicates, load_manifest};
use sociobot_core::graph::k_core_reduce;
use sociobot_core::learners;
use sociobot_core::measures::MEASURE_NAMES;
use sociobot_core::metrics::{auc, mse_risk};
use sociobot_core::pipeline::{
    design_for_model, extract_features, features_from_networks, run_cv, run_on_features, usable_rows,
};
use sociobot_core::seed;
use sociobot_core::simplex::{simplex_risk, solve_simplex_weights};
use sociobot_core::super_learner::{DISCRETE_METHOD, ENSEMBLE_METHOD};
use sociobot_core::synth::{generate_corpus, generate_networks, record_kinds};
use sociobot_core::{
    Config, CorpusRecord, DirectedGraph, EgoNetwork, FeatureMatrix, Formula, LearnerKind, LearnerSpec,
    NetworkMeasures, ProfileKind, SuperLearnerModel, SynthConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn seconds(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn random_graph(rng: &mut impl Rng) -> (usize, Vec<(usize, usize)>, usize) {
    let n = rng.random_range(3..=12);
    let p = rng.random_range(0.1..0.7);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    (n, edges, rng.random_range(0..n))
}

fn graph_measures() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(1);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for _ in 0..200 {
        let (n, edges, ego) = random_graph(&mut rng);
        let net = EgoNetwork::new(DirectedGraph::from_indexed_edges(n, &edges).unwrap(), ego).unwrap();
        let g = oracle::Graph::new(n, edges.iter().copied());
        let keep = oracle::k_core(&g, 2, ego);
        let (core, core_ego) = oracle::induced(&g, &keep, ego);
        let pairs = [
            (NetworkMeasures::compute(&net).values(), oracle::measures(&g, ego)),
            (
                NetworkMeasures::compute(&k_core_reduce(&net, 2)).values(),
                oracle::measures(&core, core_ego),
            ),
        ];
        for (got, want) in pairs {
            for (i, (a, b)) in got.iter().zip(&want).enumerate() {
                let diff = (a - b).abs();
                if diff.is_nan() || diff > 1e-9 {
                    return Err(format!("{} differs: {a} vs {b} on n={n}", MEASURE_NAMES[i]));
                }
                worst = worst.max(diff);
                compared += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        t < Duration::from_secs(30),
        format!("{compared} values, max diff {worst:.1e}, {}", seconds(t)),
    )
}

fn auc_oracle() -> Outcome {
    let mut rng = seed::rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..=25);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.35))).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle::pairwise_auc(&scores, &labels)).abs());
    }
    check(
        worst <= 1e-12,
        format!("100 tied score sets, max diff {worst:.1e}"),
    )
}

fn mean_training_risk(labels: &[f64]) -> f64 {
    let n = labels.len();
    let rows = vec![vec![0.0]; n];
    let x = FeatureMatrix::from_rows(
        (0..n).map(|i| i.to_string()).collect(),
        vec!["x".into()],
        &rows,
        labels.iter().map(|&l| l as u8).collect(),
        vec![None; n],
    )
    .unwrap();
    let m = learners::train(&LearnerSpec::new("mean", LearnerKind::Mean), &x, labels).unwrap();
    mse_risk(&m.predict(&x).unwrap(), labels).unwrap()
}

fn mean_risk() -> Outcome {
    let mut rng = seed::rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=500);
        let share = rng.random::<f64>();
        let y: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(rng.random_bool(share))))
            .collect();
        let p = y.iter().sum::<f64>() / n as f64;
        worst = worst.max((mean_training_risk(&y) - p * (1.0 - p)).abs());
    }
    let y: Vec<f64> = (0..1000).map(|i| f64::from(u8::from(i < 292))).collect();
    let at_share_0292 = mean_training_risk(&y);
    check(
        worst <= 1e-9 && (at_share_0292 - 0.207).abs() <= 5e-4,
        format!("max diff {worst:.1e}; share 0.292 gives {at_share_0292:.6}"),
    )
}

fn weights_ok(m: &SuperLearnerModel) -> bool {
    m.weights.iter().all(|&w| w >= 0.0) && (m.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

fn simplex(fitted: &[SuperLearnerModel]) -> Outcome {
    let mut rng = seed::rng(4);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let l = rng.random_range(1..=3);
        let n = rng.random_range(5..=60);
        let y: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(rng.random_bool(0.3))))
            .collect();
        let z: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        let zm = DMatrix::from_fn(n, l, |i, j| z[j][i]);
        let w = solve_simplex_weights(&zm, &y);
        if !(w.iter().all(|&a| a >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9) {
            return Err(format!("weights {w:?} leave the simplex"));
        }
        let gap = simplex_risk(&zm, &y, &w) - oracle::grid_simplex_risk(&z, &y);
        worst = worst.max(gap.abs());
    }
    let bad = fitted.iter().filter(|m| !weights_ok(m)).count();
    check(
        bad == 0 && worst <= 1e-4,
        format!(
            "{} fitted ensembles on the simplex, {bad} off; 300 grid problems, max gap {worst:.1e}",
            fitted.len()
        ),
    )
}

fn cv_analog() -> Outcome {
    let start = Instant::now();
    let config = Config::default();
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_corpus(&config.synth, &tmp.path().join("corpus")).map_err(|e| e.to_string())?;
    let reports = run_cv(&manifest, &config, &tmp.path().join("cv")).map_err(|e| e.to_string())?;
    let mut close = 0;
    let mut beaten = true;
    let mut summary = Vec::new();
    for (formula, r) in &reports {
        let learners: Vec<usize> = (0..r.methods.len())
            .filter(|&m| r.methods[m] != ENSEMBLE_METHOD && r.methods[m] != DISCRETE_METHOD)
            .collect();
        let best = learners
            .iter()
            .map(|&m| r.mean_risk(m))
            .fold(f64::INFINITY, f64::min);
        let ens = r.mean_risk(r.method_index(ENSEMBLE_METHOD).unwrap());
        if ens <= best + 0.01 {
            close += 1;
        }
        let mean = r.mean_risk(r.method_index("mean").unwrap());
        beaten &= learners
            .iter()
            .filter(|&&m| r.methods[m] != "mean")
            .all(|&m| r.mean_risk(m) < mean);
        summary.push(format!("{formula} {ens:.4}/{best:.4}"));
    }
    let t = start.elapsed();
    check(
        close >= 3 && beaten && t < Duration::from_secs(600),
        format!(
            "ensemble/best learner {}; {close}/4 within 0.01; mean beaten by all: {beaten}; {}",
            summary.join(", "),
            seconds(t)
        ),
    )
}

fn formula_ordering(fitted: &mut Vec<SuperLearnerModel>) -> Outcome {
    let (mut sl4_wins, mut sl1_good) = (0, 0);
    let mut aucs = Vec::new();
    for s in 1..=10u64 {
        let mut config = Config::default();
        config.set("seed", &s.to_string()).unwrap();
        config.set("formulas", "SL1,SL3,SL4").unwrap();
        config.synth.score_noise_sd = 0.35;
        config.synth.score_flip_prob = 0.05;
        let items = generate_networks(&config.synth).map_err(|e| e.to_string())?;
        let features = features_from_networks(&items, config.k).map_err(|e| e.to_string())?;
        let result = run_on_features(features, &config).map_err(|e| e.to_string())?;
        let auc_of = |f| result.auc(f).unwrap_or(f64::NAN);
        let (a1, a3, a4) = (auc_of(Formula::Sl1), auc_of(Formula::Sl3), auc_of(Formula::Sl4));
        sl4_wins += usize::from(a4 >= a3);
        sl1_good += usize::from(a1 > 0.75);
        aucs.push((a1, a3, a4));
        fitted.extend(result.models);
    }
    let mean = |f: fn(&(f64, f64, f64)) -> f64| aucs.iter().map(f).sum::<f64>() / aucs.len() as f64;
    check(
        sl4_wins >= 8 && sl1_good >= 8,
        format!(
            "SL4>=SL3 in {sl4_wins}/10, SL1>0.75 in {sl1_good}/10; mean AUC SL1 {:.3} SL3 {:.3} SL4 {:.3}",
            mean(|a| a.0),
            mean(|a| a.1),
            mean(|a| a.2)
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.is_dir() {
            out.extend(tree(&path).into_iter().map(|(k, v)| (format!("{name}/{k}"), v)));
        } else {
            out.insert(name, fs::read(&path).unwrap());
        }
    }
    out
}

fn sociobot(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sociobot"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    sociobot(&["generate", "--out", &p("corpus")])?;
    let manifest = p("corpus/manifest.csv");
    sociobot(&["pipeline", "--manifest", &manifest, "--out", &p("run1")])?;
    sociobot(&["pipeline", "--manifest", &manifest, "--out", &p("run2")])?;
    let (a, b) = (tree(&tmp.path().join("run1")), tree(&tmp.path().join("run2")));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let bytes: usize = a.values().map(Vec::len).sum();
    check(
        differing.is_empty() && a.len() == b.len(),
        format!(
            "{} files, {bytes} bytes compared; differing: {differing:?}",
            a.len()
        ),
    )
}

fn duplicates() -> Outcome {
    let synth = SynthConfig::with_counts(&[
        (ProfileKind::Human, 40),
        (ProfileKind::BotRandom, 12),
        (ProfileKind::BotClone, 3),
    ]);
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_corpus(&synth, tmp.path()).map_err(|e| e.to_string())?;
    let records = load_manifest(&manifest).map_err(|e| e.to_string())?;
    let features = extract_features(&records, 2).map_err(|e| e.to_string())?;
    let groups = find_duplicates(&features);
    let clones: Vec<String> = record_kinds(&synth)
        .iter()
        .zip(&records)
        .filter(|(k, _)| **k == ProfileKind::BotClone)
        .map(|(_, r)| r.id.clone())
        .collect();
    check(
        groups.len() == 1 && groups[0] == clones,
        format!("groups {groups:?}, clone records {clones:?}"),
    )
}

fn labelled(id: &str, label: u8, score: f64, net: EgoNetwork) -> (CorpusRecord, EgoNetwork) {
    let record = CorpusRecord {
        id: id.to_string(),
        label,
        external_score: Some(score),
        network_path: Default::default(),
    };
    (record, net)
}

fn star(hub: &str, leaves: usize, inward: bool) -> EgoNetwork {
    let names: Vec<String> = (0..leaves).map(|i| format!("{hub}_{i}")).collect();
    let edges: Vec<(&str, &str)> = names
        .iter()
        .map(|l| {
            if inward {
                (l.as_str(), hub)
            } else {
                (hub, l.as_str())
            }
        })
        .collect();
    let g = DirectedGraph::from_edges([hub], edges).unwrap();
    EgoNetwork::new(g, 0).unwrap()
}

fn degenerate(fitted: &mut Vec<SuperLearnerModel>) -> Outcome {
    let synth = SynthConfig::with_counts(&[
        (ProfileKind::Human, 60),
        (ProfileKind::BotRandom, 20),
        (ProfileKind::BotStar, 10),
    ]);
    let mut items = generate_networks(&synth).map_err(|e| e.to_string())?;
    for i in 0..6 {
        let label = (i % 2) as u8;
        items.push(labelled(
            &format!("single{i}"),
            label,
            0.5,
            EgoNetwork::singleton(&format!("s{i}")),
        ));
        items.push(labelled(
            &format!("star{i}"),
            label,
            0.4 + 0.1 * label as f64,
            star(&format!("h{i}"), 3 + i, i % 3 == 0),
        ));
    }
    let config = Config::default();
    let features = features_from_networks(&items, config.k).map_err(|e| e.to_string())?;
    if features.values().iter().any(|v| !v.is_finite()) {
        return Err("non-finite feature".into());
    }
    let result = run_on_features(features.clone(), &config).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for (model, e) in result.models.iter().zip(&result.evaluations) {
        let rows = usable_rows(e.formula, &features, false).map_err(|e| e.to_string())?;
        let x = design_for_model(model, &features.select_rows(&rows)).map_err(|e| e.to_string())?;
        let all = model.predict(&x).map_err(|e| e.to_string())?;
        let report_values = e.report.iter().flat_map(|r| {
            [
                r.auc.unwrap_or(0.0),
                r.balanced_accuracy,
                r.precision,
                r.recall,
                r.f1,
            ]
        });
        let finite = all
            .iter()
            .chain(&e.predictions)
            .copied()
            .chain(report_values)
            .chain([e.mse])
            .all(f64::is_finite);
        if !finite {
            return Err(format!("{} produced a non-finite value", e.formula));
        }
        checked += all.len();
    }
    fitted.extend(result.models);
    check(
        checked > 0,
        format!(
            "{} records incl. 6 single-vertex and 16 star egos; {checked} predictions finite",
            items.len()
        ),
    )
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let mut fitted = Vec::new();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(name) {
            return;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(&mut *run))
            .unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {n} {name:<22} {tag} [{}] {detail}",
            seconds(start.elapsed())
        );
    };
    report(1, "graph_measures", &mut graph_measures);
    report(2, "auc_oracle", &mut auc_oracle);
    report(3, "mean_risk", &mut mean_risk);
    report(5, "cv_ensemble", &mut cv_analog);
    report(6, "formula_ordering", &mut || formula_ordering(&mut fitted));
    report(7, "determinism", &mut determinism);
    report(8, "duplicates", &mut duplicates);
    report(9, "degenerate_networks", &mut || degenerate(&mut fitted));
    // Runs last so it can inspect every ensemble fitted above.
    report(4, "simplex_weights", &mut || simplex(&fitted));
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
