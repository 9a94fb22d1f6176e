//! Versioned text format for fitted ensembles.
//!
//! ```text
//! sociobot-model
//! format_version 1
//! name SL1
//! family binomial
//! features 2 a b
//! scaler 2
//! column a <mean> <sd>
//! column b <mean> <sd>
//! ensemble
//! folds 10
//! seed 7
//! learners 2
//! weight 0 mean <alpha> <cv_risk>
//! weight 1 forest <alpha> <cv_risk>
//! end_ensemble
//! learner mean
//! spec kind=mean tree_count=200 ... seed=0
//! fitted mean <value>
//! end_learner
//! ...
//! ```
//!
//! Trees are written pre-order, one node per line: `S <feature> <threshold>`
//! for splits and `L <value>` for leaves. Floats use Rust's shortest
//! round-trip representation, so `parse(write(m)) == m` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Scaler;
use crate::error::{Error, Result};
use crate::learners::{Family, Fitted, LearnerKind, LearnerModel, LearnerSpec, Linear, Node, Tree};
use crate::super_learner::SuperLearnerModel;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sociobot-model";

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn write_spec(out: &mut String, s: &LearnerSpec) {
    writeln!(
        out,
        "spec kind={} tree_count={} bag_count={} features_per_split={} max_depth={} min_leaf={} ridge_penalty={:?} family={} seed={}",
        s.kind,
        s.tree_count,
        s.bag_count,
        opt_usize(s.features_per_split),
        opt_usize(s.max_depth),
        s.min_leaf,
        s.ridge_penalty,
        s.family,
        s.seed
    )
    .unwrap();
}

fn write_tree(out: &mut String, t: &Tree) {
    writeln!(out, "tree {}", t.nodes().len()).unwrap();
    for node in t.nodes() {
        match node {
            Node::Leaf(v) => writeln!(out, "L {v:?}").unwrap(),
            Node::Split {
                feature, threshold, ..
            } => writeln!(out, "S {feature} {threshold:?}").unwrap(),
        }
    }
}

/// Serializes a fitted ensemble.
pub fn write_model(m: &SuperLearnerModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "format_version {FORMAT_VERSION}").unwrap();
    writeln!(out, "name {}", m.name).unwrap();
    writeln!(out, "family {}", m.family).unwrap();
    writeln!(out, "features {} {}", m.features.len(), m.features.join(" ")).unwrap();
    match &m.scaler {
        None => writeln!(out, "scaler 0").unwrap(),
        Some(s) => {
            writeln!(out, "scaler {}", s.columns.len()).unwrap();
            for ((c, mean), sd) in s.columns.iter().zip(&s.mean).zip(&s.sd) {
                writeln!(out, "column {c} {mean:?} {sd:?}").unwrap();
            }
        }
    }
    writeln!(out, "ensemble").unwrap();
    writeln!(out, "folds {}", m.folds).unwrap();
    writeln!(out, "seed {}", m.seed).unwrap();
    writeln!(out, "learners {}", m.library.len()).unwrap();
    for (i, spec) in m.library.iter().enumerate() {
        writeln!(
            out,
            "weight {i} {} {:?} {:?}",
            spec.name, m.weights[i], m.cv_risks[i]
        )
        .unwrap();
    }
    writeln!(out, "end_ensemble").unwrap();
    for (spec, model) in m.library.iter().zip(&m.models) {
        writeln!(out, "learner {}", spec.name).unwrap();
        write_spec(&mut out, &model.spec);
        match &model.fitted {
            Fitted::Mean(v) => writeln!(out, "fitted mean {v:?}").unwrap(),
            Fitted::Linear(lin) => {
                write!(
                    out,
                    "fitted linear {} {:?} {}",
                    lin.logistic,
                    lin.intercept,
                    lin.coef.len()
                )
                .unwrap();
                for c in &lin.coef {
                    write!(out, " {c:?}").unwrap();
                }
                writeln!(out).unwrap();
            }
            Fitted::Tree(t) => {
                writeln!(out, "fitted tree").unwrap();
                write_tree(&mut out, t);
            }
            Fitted::Ensemble(trees) => {
                writeln!(out, "fitted ensemble {}", trees.len()).unwrap();
                for t in trees {
                    write_tree(&mut out, t);
                }
            }
        }
        writeln!(out, "end_learner").unwrap();
    }
    out
}

struct Reader<'a> {
    lines: Vec<&'a str>,
    at: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.at,
            message: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<Vec<&'a str>> {
        let line = self.lines.get(self.at).ok_or_else(|| Error::Parse {
            line: self.at + 1,
            message: "unexpected end of model file".into(),
        })?;
        self.at += 1;
        Ok(line.split_whitespace().collect())
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next_line()?;
        if toks.first() != Some(&key) {
            return Err(self.err(format!(
                "expected {key:?}, found {:?}",
                toks.first().unwrap_or(&"")
            )));
        }
        Ok(toks[1..].to_vec())
    }

    fn num<T: std::str::FromStr>(&self, tok: Option<&&str>) -> Result<T> {
        let tok = tok.ok_or_else(|| self.err("missing value"))?;
        tok.parse().map_err(|_| self.err(format!("bad number {tok:?}")))
    }

    fn tree(&mut self) -> Result<Tree> {
        let count: usize = {
            let t = self.expect("tree")?;
            self.num(t.first())?
        };
        let mut raw = Vec::with_capacity(count);
        for _ in 0..count {
            let t = self.next_line()?;
            match t.first().copied() {
                Some("L") => raw.push((true, 0usize, self.num::<f64>(t.get(1))?)),
                Some("S") => raw.push((false, self.num(t.get(1))?, self.num::<f64>(t.get(2))?)),
                _ => return Err(self.err("expected tree node")),
            }
        }
        // Recover right-child indices from the pre-order layout.
        fn subtree_end(raw: &[(bool, usize, f64)], at: usize) -> Option<usize> {
            let &(leaf, _, _) = raw.get(at)?;
            if leaf {
                Some(at + 1)
            } else {
                subtree_end(raw, subtree_end(raw, at + 1)?)
            }
        }
        let mut nodes = Vec::with_capacity(count);
        for (i, &(leaf, feature, v)) in raw.iter().enumerate() {
            nodes.push(if leaf {
                Node::Leaf(v)
            } else {
                let right = subtree_end(&raw, i + 1).ok_or_else(|| self.err("malformed tree"))?;
                Node::Split {
                    feature,
                    threshold: v,
                    right,
                }
            });
        }
        Tree::from_nodes(nodes).map_err(|e| self.err(e.to_string()))
    }
}

fn parse_opt(tok: &str) -> Option<Option<usize>> {
    if tok == "none" {
        Some(None)
    } else {
        tok.parse().ok().map(Some)
    }
}

fn parse_spec(r: &Reader<'_>, name: &str, toks: &[&str]) -> Result<LearnerSpec> {
    let mut spec = LearnerSpec::new(name, LearnerKind::Mean);
    for tok in toks {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| r.err(format!("bad spec field {tok:?}")))?;
        let bad = || r.err(format!("bad value for {k}: {v:?}"));
        match k {
            "kind" => spec.kind = v.parse().map_err(|_| bad())?,
            "tree_count" => spec.tree_count = v.parse().map_err(|_| bad())?,
            "bag_count" => spec.bag_count = v.parse().map_err(|_| bad())?,
            "features_per_split" => spec.features_per_split = parse_opt(v).ok_or_else(bad)?,
            "max_depth" => spec.max_depth = parse_opt(v).ok_or_else(bad)?,
            "min_leaf" => spec.min_leaf = v.parse().map_err(|_| bad())?,
            "ridge_penalty" => spec.ridge_penalty = v.parse().map_err(|_| bad())?,
            "family" => spec.family = v.parse().map_err(|_| bad())?,
            "seed" => spec.seed = v.parse().map_err(|_| bad())?,
            _ => return Err(r.err(format!("unknown spec field {k:?}"))),
        }
    }
    Ok(spec)
}

/// Parses a model file produced by [`write_model`].
pub fn parse_model(text: &str) -> Result<SuperLearnerModel> {
    let mut r = Reader {
        lines: text.lines().collect(),
        at: 0,
    };
    if r.next_line()? != [MAGIC] {
        return Err(r.err("not a model file"));
    }
    let version: u32 = {
        let t = r.expect("format_version")?;
        r.num(t.first())?
    };
    if version != FORMAT_VERSION {
        return Err(r.err(format!("unsupported format_version {version}")));
    }
    let name = r.expect("name")?.join(" ");
    let family: Family = {
        let t = r.expect("family")?;
        t.first()
            .ok_or_else(|| r.err("missing family"))?
            .parse()
            .map_err(|e: Error| r.err(e.to_string()))?
    };
    let features: Vec<String> = {
        let t = r.expect("features")?;
        let n: usize = r.num(t.first())?;
        if t.len() != n + 1 {
            return Err(r.err("feature count mismatch"));
        }
        t[1..].iter().map(|s| s.to_string()).collect()
    };
    let scaler = {
        let t = r.expect("scaler")?;
        let n: usize = r.num(t.first())?;
        if n == 0 {
            None
        } else {
            let mut s = Scaler {
                columns: Vec::new(),
                mean: Vec::new(),
                sd: Vec::new(),
            };
            for _ in 0..n {
                let c = r.expect("column")?;
                s.columns
                    .push(c.first().ok_or_else(|| r.err("missing column name"))?.to_string());
                s.mean.push(r.num(c.get(1))?);
                s.sd.push(r.num(c.get(2))?);
            }
            Some(s)
        }
    };
    r.expect("ensemble")?;
    let folds: usize = {
        let t = r.expect("folds")?;
        r.num(t.first())?
    };
    let seed: u64 = {
        let t = r.expect("seed")?;
        r.num(t.first())?
    };
    let count: usize = {
        let t = r.expect("learners")?;
        r.num(t.first())?
    };
    let (mut names, mut weights, mut cv_risks) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..count {
        let t = r.expect("weight")?;
        if r.num::<usize>(t.first())? != i {
            return Err(r.err("weights out of order"));
        }
        names.push(t.get(1).ok_or_else(|| r.err("missing learner name"))?.to_string());
        weights.push(r.num(t.get(2))?);
        cv_risks.push(r.num(t.get(3))?);
    }
    r.expect("end_ensemble")?;

    let mut library = Vec::new();
    let mut models = Vec::new();
    for name in &names {
        let t = r.expect("learner")?;
        if t.first() != Some(&name.as_str()) {
            return Err(r.err(format!("expected learner {name:?}")));
        }
        let spec_toks = r.expect("spec")?;
        let spec = parse_spec(&r, name, &spec_toks)?;
        let t = r.expect("fitted")?;
        let fitted = match t.first().copied() {
            Some("mean") => Fitted::Mean(r.num(t.get(1))?),
            Some("linear") => {
                let logistic: bool = t
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| r.err("bad link flag"))?;
                let intercept = r.num(t.get(2))?;
                let p: usize = r.num(t.get(3))?;
                if t.len() != 4 + p {
                    return Err(r.err("coefficient count mismatch"));
                }
                let coef = (0..p).map(|j| r.num(t.get(4 + j))).collect::<Result<_>>()?;
                Fitted::Linear(Linear {
                    intercept,
                    coef,
                    logistic,
                })
            }
            Some("tree") => Fitted::Tree(r.tree()?),
            Some("ensemble") => {
                let k: usize = r.num(t.get(1))?;
                Fitted::Ensemble((0..k).map(|_| r.tree()).collect::<Result<_>>()?)
            }
            other => return Err(r.err(format!("unknown fitted kind {other:?}"))),
        };
        r.expect("end_learner")?;
        library.push(LearnerSpec {
            name: name.clone(),
            ..spec.clone()
        });
        models.push(LearnerModel {
            spec,
            features: features.clone(),
            fitted,
        });
    }
    if r.at != r.lines.len() {
        return Err(r.err("trailing content after last learner"));
    }
    Ok(SuperLearnerModel {
        name,
        family,
        library,
        weights,
        cv_risks,
        models,
        features,
        scaler,
        folds,
        seed,
    })
}

pub fn save_model(path: &Path, m: &SuperLearnerModel) -> Result<()> {
    std::fs::write(path, write_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SuperLearnerModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}
