//! Run configuration in a flat `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `seed` | master seed for generation, splitting, folds and learners |
//! | `split_ratio` | training share of the train/test split |
//! | `stratified` | split within each label instead of over all rows |
//! | `k` | core order of the k-core reduction |
//! | `folds` | Super Learner folds |
//! | `outer_folds` | outer folds of the cross-validated ensemble check |
//! | `threshold` | score cut-off for the confusion-based measures |
//! | `formulas` | comma list of `SL1`..`SL4` |
//! | `drop_missing_scores` | exclude unscored records instead of failing |
//! | `library` | comma list of learner names |
//! | `learner.<name>.<param>` | `kind`, `tree_count`, `bag_count`, `features_per_split`, `max_depth`, `min_leaf`, `ridge_penalty`, `seed` |
//! | `count.<kind>` | synthetic records of a profile kind |
//! | `<kind>.<param>` | generator profile parameter |
//! | `score_noise_sd`, `score_flip_prob` | synthetic score noise |
//!
//! A library name that is itself a learner kind needs no `kind` entry.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearnerSpec};
use crate::pipeline::Formula;
use crate::seed;
use crate::synth::{ProfileKind, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub split_ratio: f64,
    pub stratified: bool,
    pub k: usize,
    pub folds: usize,
    pub outer_folds: usize,
    pub threshold: f64,
    pub formulas: Vec<Formula>,
    pub drop_missing_scores: bool,
    pub library: Vec<String>,
    /// Raw `learner.<name>.<param>` values, resolved by [`Config::learners`].
    pub learner_params: BTreeMap<String, BTreeMap<String, String>>,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        let mut learner_params = BTreeMap::new();
        let ranger = BTreeMap::from([
            ("kind".to_string(), "random_forest".to_string()),
            ("features_per_split".to_string(), "2".to_string()),
        ]);
        learner_params.insert("ranger".to_string(), ranger);
        // An unpruned single tree chases the noise in the score regression.
        let tree = BTreeMap::from([("max_depth".to_string(), "3".to_string())]);
        learner_params.insert("tree".to_string(), tree);
        Config {
            seed: crate::synth::DEFAULT_CORPUS_SEED,
            split_ratio: 0.8,
            stratified: false,
            k: crate::graph::DEFAULT_CORE_K,
            folds: crate::super_learner::DEFAULT_FOLDS,
            outer_folds: crate::super_learner::DEFAULT_FOLDS,
            threshold: crate::metrics::DEFAULT_THRESHOLD,
            formulas: Formula::ALL.to_vec(),
            drop_missing_scores: false,
            library: [
                "mean",
                "regression",
                "tree",
                "bagged_trees",
                "random_forest",
                "ranger",
            ]
            .map(String::from)
            .to_vec(),
            learner_params,
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::argument(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::argument(format!(
            "{key}: expected true or false, found {value:?}"
        ))),
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

const LEARNER_PARAMS: [&str; 8] = [
    "kind",
    "tree_count",
    "bag_count",
    "features_per_split",
    "max_depth",
    "min_leaf",
    "ridge_penalty",
    "seed",
];

impl Config {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "seed" => {
                self.seed = parse(key, value)?;
                self.synth.seed = self.seed;
            }
            "split_ratio" => self.split_ratio = parse(key, value)?,
            "stratified" => self.stratified = parse_bool(key, value)?,
            "k" => self.k = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "outer_folds" => self.outer_folds = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "formulas" => {
                self.formulas = list(value).iter().map(|f| f.parse()).collect::<Result<_>>()?;
            }
            "drop_missing_scores" => self.drop_missing_scores = parse_bool(key, value)?,
            "library" => self.library = list(value),
            "score_noise_sd" => self.synth.score_noise_sd = parse(key, value)?,
            "score_flip_prob" => self.synth.score_flip_prob = parse(key, value)?,
            _ => return self.set_dotted(key, value),
        }
        Ok(())
    }

    fn set_dotted(&mut self, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::argument(format!("unknown configuration key {key:?}"));
        let (head, rest) = key.split_once('.').ok_or_else(unknown)?;
        if head == "learner" {
            let (name, param) = rest.split_once('.').ok_or_else(unknown)?;
            if !LEARNER_PARAMS.contains(&param) {
                return Err(unknown());
            }
            self.learner_params
                .entry(name.to_string())
                .or_default()
                .insert(param.to_string(), value.to_string());
            return Ok(());
        }
        if head == "count" {
            let kind: ProfileKind = rest.parse()?;
            let n = parse(key, value)?;
            for (p, count) in &mut self.synth.profiles {
                if p.kind == kind {
                    *count = n;
                }
            }
            return Ok(());
        }
        let kind: ProfileKind = head.parse().map_err(|_| unknown())?;
        let (profile, _) = self
            .synth
            .profiles
            .iter_mut()
            .find(|(p, _)| p.kind == kind)
            .expect("every kind has a profile");
        match rest {
            "repertoire_mean" => profile.repertoire_mean = parse(key, value)?,
            "repertoire_dispersion" => profile.repertoire_dispersion = parse(key, value)?,
            "community_count" => profile.community_count = parse(key, value)?,
            "intra_community_follow_prob" => profile.intra_community_follow_prob = parse(key, value)?,
            "reciprocity_prob" => profile.reciprocity_prob = parse(key, value)?,
            "alter_expansion_mean" => profile.alter_expansion_mean = parse(key, value)?,
            "preferential_attachment_strength" => {
                profile.preferential_attachment_strength = parse(key, value)?
            }
            "heterogeneity" => profile.heterogeneity = parse(key, value)?,
            "template_seed" => profile.template_seed = parse(key, value)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Applies every setting of a configuration text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, found {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Every setting as configuration text; `from_text(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("seed", self.seed.to_string());
        kv("split_ratio", self.split_ratio.to_string());
        kv("stratified", self.stratified.to_string());
        kv("k", self.k.to_string());
        kv("folds", self.folds.to_string());
        kv("outer_folds", self.outer_folds.to_string());
        kv("threshold", self.threshold.to_string());
        kv(
            "formulas",
            self.formulas
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("drop_missing_scores", self.drop_missing_scores.to_string());
        kv("library", self.library.join(", "));
        for (name, params) in &self.learner_params {
            for (param, value) in params {
                kv(&format!("learner.{name}.{param}"), value.clone());
            }
        }
        for (p, n) in &self.synth.profiles {
            kv(&format!("count.{}", p.kind), n.to_string());
        }
        kv("score_noise_sd", self.synth.score_noise_sd.to_string());
        kv("score_flip_prob", self.synth.score_flip_prob.to_string());
        for (p, _) in &self.synth.profiles {
            let k = p.kind;
            kv(&format!("{k}.repertoire_mean"), p.repertoire_mean.to_string());
            kv(
                &format!("{k}.repertoire_dispersion"),
                p.repertoire_dispersion.to_string(),
            );
            kv(&format!("{k}.community_count"), p.community_count.to_string());
            kv(
                &format!("{k}.intra_community_follow_prob"),
                p.intra_community_follow_prob.to_string(),
            );
            kv(&format!("{k}.reciprocity_prob"), p.reciprocity_prob.to_string());
            kv(
                &format!("{k}.alter_expansion_mean"),
                p.alter_expansion_mean.to_string(),
            );
            kv(
                &format!("{k}.preferential_attachment_strength"),
                p.preferential_attachment_strength.to_string(),
            );
            kv(&format!("{k}.heterogeneity"), p.heterogeneity.to_string());
            kv(&format!("{k}.template_seed"), p.template_seed.to_string());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Config> {
        let mut c = Config::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_text(&text)
    }

    /// Resolves the library into learner specs. Learner seeds default to a
    /// value derived from the master seed and the learner's position.
    pub fn learners(&self) -> Result<Vec<LearnerSpec>> {
        let empty = BTreeMap::new();
        self.library
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let params = self.learner_params.get(name).unwrap_or(&empty);
                let kind: LearnerKind = match params.get("kind") {
                    Some(k) => k.parse()?,
                    None => name.parse().map_err(|_| {
                        Error::argument(format!("learner {name:?} needs a learner.{name}.kind entry"))
                    })?,
                };
                let mut spec =
                    LearnerSpec::new(name.clone(), kind).with_seed(seed::derive(self.seed, 1000 + i as u64));
                for (param, value) in params {
                    let key = format!("learner.{name}.{param}");
                    let opt = |v: &str| -> Result<Option<usize>> {
                        if v == "none" {
                            Ok(None)
                        } else {
                            parse(&key, v).map(Some)
                        }
                    };
                    match param.as_str() {
                        "kind" => {}
                        "tree_count" => spec.tree_count = parse(&key, value)?,
                        "bag_count" => spec.bag_count = parse(&key, value)?,
                        "features_per_split" => spec.features_per_split = opt(value)?,
                        "max_depth" => spec.max_depth = opt(value)?,
                        "min_leaf" => spec.min_leaf = parse(&key, value)?,
                        "ridge_penalty" => spec.ridge_penalty = parse(&key, value)?,
                        "seed" => spec.seed = parse(&key, value)?,
                        _ => unreachable!("filtered in set_dotted"),
                    }
                }
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::argument(format!(
                "split_ratio {} outside (0, 1)",
                self.split_ratio
            )));
        }
        if self.k < 1 {
            return Err(Error::argument("k must be at least 1"));
        }
        if self.folds < 2 || self.outer_folds < 2 {
            return Err(Error::argument("folds and outer_folds must be at least 2"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::argument("threshold must be finite"));
        }
        if self.formulas.is_empty() {
            return Err(Error::argument("no formulas selected"));
        }
        if self.library.is_empty() {
            return Err(Error::argument("empty learner library"));
        }
        self.learners()?;
        self.synth.validate()
    }
}
