//! Seeded generator of labelled two-step ego networks and synthetic
//! external-classifier scores.
//!
//! A network is the ego, the alters it follows, and the accounts those alters
//! follow. Human egos pick alters from a few communities; alters follow each
//! other mostly inside their community, cross communities by preferential
//! attachment, and draw their own follows from community pools that favour
//! already popular accounts. Random bots have the same sizes but wire
//! everything uniformly. Clones re-emit one template under fresh labels, and
//! star bots follow a single account.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use rayon::prelude::*;

use crate::corpus::{write_manifest, CorpusRecord};
use crate::error::{Error, Result};
use crate::graph::{write_edge_list, DirectedGraph, EgoNetwork};
use crate::seed;

/// Upper bound on a drawn repertoire; keeps desk-scale networks tractable.
pub const MAX_REPERTOIRE: usize = 400;
const MAX_EXPANSION: usize = 300;

const RECORD_STREAM: u64 = 1;
const SCORE_STREAM: u64 = 2;
const ORDER_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileKind {
    Human,
    BotRandom,
    BotClone,
    BotStar,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 4] = [
        ProfileKind::Human,
        ProfileKind::BotRandom,
        ProfileKind::BotClone,
        ProfileKind::BotStar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Human => "human",
            ProfileKind::BotRandom => "bot_random",
            ProfileKind::BotClone => "bot_clone",
            ProfileKind::BotStar => "bot_star",
        }
    }

    /// 0 for humans, 1 for every bot kind.
    pub fn label(self) -> u8 {
        u8::from(self != ProfileKind::Human)
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown profile kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProfile {
    pub kind: ProfileKind,
    /// Mean of the log-normal ego out-degree.
    pub repertoire_mean: f64,
    /// Standard deviation of the log of the ego out-degree.
    pub repertoire_dispersion: f64,
    pub community_count: usize,
    pub intra_community_follow_prob: f64,
    pub reciprocity_prob: f64,
    /// Mean number of accounts each alter follows.
    pub alter_expansion_mean: f64,
    /// Expected number of cross-community follows per alter.
    pub preferential_attachment_strength: f64,
    /// Standard deviation of per-network log-normal multipliers applied to
    /// the follow, reciprocity, expansion and attachment parameters; 0 makes
    /// every network of the kind statistically alike.
    pub heterogeneity: f64,
    /// Seed of the shared template (clones only).
    pub template_seed: u64,
}

impl GeneratorProfile {
    pub fn default_for(kind: ProfileKind) -> Self {
        let base = GeneratorProfile {
            kind,
            repertoire_mean: 40.0,
            repertoire_dispersion: 0.5,
            community_count: 2,
            intra_community_follow_prob: 0.1,
            reciprocity_prob: 0.2,
            alter_expansion_mean: 30.0,
            preferential_attachment_strength: 1.0,
            heterogeneity: 0.5,
            template_seed: 0,
        };
        match kind {
            ProfileKind::Human => base,
            ProfileKind::BotRandom => GeneratorProfile {
                community_count: 1,
                intra_community_follow_prob: 0.06,
                preferential_attachment_strength: 0.0,
                ..base
            },
            ProfileKind::BotClone => GeneratorProfile {
                repertoire_mean: 20.0,
                repertoire_dispersion: 0.0,
                community_count: 1,
                intra_community_follow_prob: 0.05,
                reciprocity_prob: 0.05,
                alter_expansion_mean: 10.0,
                preferential_attachment_strength: 0.0,
                heterogeneity: 0.0,
                template_seed: 20190101,
                ..base
            },
            ProfileKind::BotStar => GeneratorProfile {
                repertoire_mean: 1.0,
                repertoire_dispersion: 0.0,
                community_count: 1,
                intra_community_follow_prob: 0.0,
                reciprocity_prob: 0.0,
                alter_expansion_mean: 0.0,
                preferential_attachment_strength: 0.0,
                heterogeneity: 0.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::argument(format!("{} profile: {what}", self.kind)));
        for (name, p) in [
            ("intra_community_follow_prob", self.intra_community_follow_prob),
            ("reciprocity_prob", self.reciprocity_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.repertoire_mean > 0.0 && self.repertoire_mean.is_finite()) {
            return bad("repertoire_mean must be positive");
        }
        if !(self.repertoire_dispersion >= 0.0 && self.repertoire_dispersion.is_finite()) {
            return bad("repertoire_dispersion must be non-negative");
        }
        if self.community_count < 1 {
            return bad("community_count must be at least 1");
        }
        if !(self.alter_expansion_mean >= 0.0 && self.alter_expansion_mean.is_finite()) {
            return bad("alter_expansion_mean must be non-negative");
        }
        if !(self.preferential_attachment_strength >= 0.0
            && self.preferential_attachment_strength.is_finite())
        {
            return bad("preferential_attachment_strength must be non-negative");
        }
        if !(self.heterogeneity >= 0.0 && self.heterogeneity.is_finite()) {
            return bad("heterogeneity must be non-negative");
        }
        Ok(())
    }
}

/// Everything needed to write a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Record count and profile per kind, in [`ProfileKind::ALL`] order.
    pub profiles: Vec<(GeneratorProfile, usize)>,
    pub score_noise_sd: f64,
    pub score_flip_prob: f64,
    pub seed: u64,
}

pub const DEFAULT_CORPUS_SEED: u64 = 7;
pub const DEFAULT_SCORE_NOISE_SD: f64 = 0.35;
pub const DEFAULT_SCORE_FLIP_PROB: f64 = 0.05;

impl Default for SynthConfig {
    fn default() -> Self {
        let counts = [206, 64, 15, 15];
        SynthConfig {
            profiles: ProfileKind::ALL
                .into_iter()
                .zip(counts)
                .map(|(k, c)| (GeneratorProfile::default_for(k), c))
                .collect(),
            score_noise_sd: DEFAULT_SCORE_NOISE_SD,
            score_flip_prob: DEFAULT_SCORE_FLIP_PROB,
            seed: DEFAULT_CORPUS_SEED,
        }
    }
}

impl SynthConfig {
    /// Default profiles with the given record counts.
    pub fn with_counts(counts: &[(ProfileKind, usize)]) -> Self {
        let mut c = SynthConfig::default();
        for (profile, n) in &mut c.profiles {
            *n = counts
                .iter()
                .find(|(k, _)| *k == profile.kind)
                .map_or(0, |&(_, n)| n);
        }
        c
    }

    pub fn count(&self, kind: ProfileKind) -> usize {
        self.profiles
            .iter()
            .filter(|(p, _)| p.kind == kind)
            .map(|&(_, n)| n)
            .sum()
    }

    pub fn profile(&self, kind: ProfileKind) -> Option<&GeneratorProfile> {
        self.profiles.iter().map(|(p, _)| p).find(|p| p.kind == kind)
    }

    pub fn validate(&self) -> Result<()> {
        for (p, _) in &self.profiles {
            p.validate()?;
        }
        let humans = self.count(ProfileKind::Human);
        let total: usize = self.profiles.iter().map(|&(_, n)| n).sum();
        if total < 2 || humans == 0 || humans == total {
            return Err(Error::argument(format!(
                "a corpus needs both labels; got {humans} human and {} bot records",
                total - humans
            )));
        }
        if !(self.score_noise_sd >= 0.0 && self.score_noise_sd.is_finite()) {
            return Err(Error::argument("score_noise_sd must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.score_flip_prob) {
            return Err(Error::argument("score_flip_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn repertoire_size(p: &GeneratorProfile, rng: &mut ChaCha8Rng) -> usize {
    let sigma = p.repertoire_dispersion;
    let draw = if sigma == 0.0 {
        p.repertoire_mean
    } else {
        // Parameterized so the mean of the draw is repertoire_mean.
        let mu = p.repertoire_mean.ln() - sigma * sigma / 2.0;
        LogNormal::new(mu, sigma).expect("validated").sample(rng)
    };
    (draw.round() as usize).clamp(1, MAX_REPERTOIRE)
}

fn poisson(mean: f64, cap: usize, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let v: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    (v as usize).min(cap)
}

/// Index drawn with probability proportional to `weights`.
fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Edges over indices: 0 is the ego, `1..=m` the alters, the rest second-step
/// accounts. Returns the vertex count alongside the edges.
/// The profile with its rate parameters scaled by mean-one log-normal
/// factors, one per parameter.
fn jittered(p: &GeneratorProfile, rng: &mut ChaCha8Rng) -> GeneratorProfile {
    let h = p.heterogeneity;
    if h == 0.0 {
        return p.clone();
    }
    let dist = LogNormal::new(-h * h / 2.0, h).expect("validated");
    let mut f = || dist.sample(rng);
    GeneratorProfile {
        intra_community_follow_prob: (p.intra_community_follow_prob * f()).min(1.0),
        reciprocity_prob: (p.reciprocity_prob * f()).min(1.0),
        alter_expansion_mean: p.alter_expansion_mean * f(),
        preferential_attachment_strength: p.preferential_attachment_strength * f(),
        ..p.clone()
    }
}

fn wire(p: &GeneratorProfile, rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    let p = &jittered(p, rng);
    let m = repertoire_size(p, rng);
    let structured = p.kind == ProfileKind::Human;
    let blocks = if structured { p.community_count.min(m) } else { 1 };
    let block: Vec<usize> = (0..m).map(|_| rng.random_range(0..blocks)).collect();
    let alter = |i: usize| i + 1;

    let mut edges: Vec<(usize, usize)> = (0..m).map(|i| (0, alter(i))).collect();
    let mut alter_in = vec![0usize; m];
    let mut follows = vec![vec![false; m]; m];

    for a in 0..m {
        for b in 0..m {
            if a != b && block[a] == block[b] && rng.random::<f64>() < p.intra_community_follow_prob {
                follows[a][b] = true;
                alter_in[b] += 1;
            }
        }
    }
    if structured && blocks > 1 {
        for a in 0..m {
            let others: Vec<usize> = (0..m)
                .filter(|&b| block[b] != block[a] && !follows[a][b])
                .collect();
            for _ in 0..poisson(p.preferential_attachment_strength, others.len(), rng) {
                let cand: Vec<usize> = others.iter().copied().filter(|&b| !follows[a][b]).collect();
                if cand.is_empty() {
                    break;
                }
                let w: Vec<f64> = cand.iter().map(|&b| alter_in[b] as f64 + 1.0).collect();
                let b = cand[weighted_pick(&w, rng)];
                follows[a][b] = true;
                alter_in[b] += 1;
            }
        }
    }
    for (a, row) in follows.iter().enumerate() {
        for (b, &f) in row.iter().enumerate() {
            if f {
                edges.push((alter(a), alter(b)));
            }
        }
        if rng.random::<f64>() < p.reciprocity_prob {
            edges.push((alter(a), 0));
        }
    }

    // Second step: each alter follows accounts from its block's pool, adding
    // new accounts at a rate that decays as the pool fills, otherwise
    // revisiting accounts in proportion to how often they were followed.
    let mut next = m + 1;
    let mut pools: Vec<Vec<(usize, usize)>> = vec![Vec::new(); blocks];
    let mut pool_alters = vec![0usize; blocks];
    block.iter().for_each(|&b| pool_alters[b] += 1);
    for a in 0..m {
        // About a quarter of a full pool's follows still land on new accounts.
        let novelty = (p.alter_expansion_mean * pool_alters[block[a]] as f64 / 4.0).max(1.0);
        let pool = &mut pools[block[a]];
        let k = poisson(p.alter_expansion_mean, MAX_EXPANSION, rng);
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        for _ in 0..k {
            let used: usize = pool.iter().map(|&(_, c)| c).sum();
            let fresh = pool.is_empty() || rng.random::<f64>() < novelty / (novelty + used as f64);
            let slot = if fresh {
                pool.push((next, 0));
                next += 1;
                pool.len() - 1
            } else {
                let w: Vec<f64> = pool.iter().map(|&(_, c)| c as f64).collect();
                weighted_pick(&w, rng)
            };
            let target = pool[slot].0;
            if !chosen.contains(&target) {
                chosen.push(target);
                pool[slot].1 += 1;
            }
        }
        edges.extend(chosen.into_iter().map(|t| (alter(a), t)));
    }
    (next, edges)
}

/// Builds the network with distinct random nine-digit account ids.
fn labelled(n: usize, edges: &[(usize, usize)], rng: &mut ChaCha8Rng) -> EgoNetwork {
    let names = rand::seq::index::sample(rng, 900_000_000, n);
    let label = |v: usize| (100_000_000 + names.index(v)).to_string();
    let g = DirectedGraph::from_edges(
        (0..n).map(label),
        edges.iter().map(|&(u, v)| (label(u), label(v))),
    )
    .expect("generator emits no self-loops");
    EgoNetwork::new(g, 0).expect("ego is vertex 0")
}

/// One synthetic ego network. Identical `(profile, seed)` pairs give
/// identical networks.
pub fn generate_ego_network(profile: &GeneratorProfile, seed: u64) -> EgoNetwork {
    let mut rng = seed::rng(seed);
    let (n, edges) = match profile.kind {
        ProfileKind::BotStar => (2, vec![(0, 1)]),
        ProfileKind::BotClone => {
            let template = GeneratorProfile {
                kind: ProfileKind::BotRandom,
                ..profile.clone()
            };
            wire(&template, &mut seed::rng(profile.template_seed))
        }
        _ => wire(profile, &mut rng),
    };
    labelled(n, &edges, &mut rng)
}

/// `clamp(target + N(0, noise_sd), 0, 1)` per record, where the target is
/// the label flipped with probability `flip_prob`.
pub fn generate_external_scores(labels: &[u8], noise_sd: f64, flip_prob: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::argument(format!(
            "noise_sd {noise_sd} must be non-negative"
        )));
    }
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::argument(format!("flip_prob {flip_prob} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, noise_sd).expect("validated");
    Ok(labels
        .iter()
        .map(|&l| {
            let flip = rng.random::<f64>() < flip_prob;
            let target = if flip { 1.0 - f64::from(l) } else { f64::from(l) };
            let e = noise.sample(&mut rng);
            (target + e).clamp(0.0, 1.0)
        })
        .collect())
}

/// Record kinds in corpus order: counts expanded, then shuffled by the seed.
pub fn record_kinds(config: &SynthConfig) -> Vec<ProfileKind> {
    let mut kinds: Vec<ProfileKind> = config
        .profiles
        .iter()
        .flat_map(|(p, n)| std::iter::repeat_n(p.kind, *n))
        .collect();
    kinds.shuffle(&mut seed::rng(seed::derive(config.seed, ORDER_STREAM)));
    kinds
}

/// Generates every network of the corpus in memory, with ids and scores.
pub fn generate_networks(config: &SynthConfig) -> Result<Vec<(CorpusRecord, EgoNetwork)>> {
    config.validate()?;
    let kinds = record_kinds(config);
    let record_seed = seed::derive(config.seed, RECORD_STREAM);
    let nets: Vec<EgoNetwork> = kinds
        .par_iter()
        .enumerate()
        .map(|(i, &kind)| {
            let profile = config.profile(kind).expect("kind comes from the config");
            generate_ego_network(profile, seed::derive(record_seed, i as u64))
        })
        .collect();
    let labels: Vec<u8> = kinds.iter().map(|k| k.label()).collect();
    let scores = generate_external_scores(
        &labels,
        config.score_noise_sd,
        config.score_flip_prob,
        seed::derive(config.seed, SCORE_STREAM),
    )?;
    let width = kinds.len().to_string().len().max(4);
    Ok(nets
        .into_iter()
        .enumerate()
        .map(|(i, net)| {
            let id = format!("acct{:0width$}", i + 1);
            let record = CorpusRecord {
                network_path: PathBuf::from("networks").join(format!("{id}.edges")),
                id,
                label: labels[i],
                external_score: Some(scores[i]),
            };
            (record, net)
        })
        .collect())
}

/// Writes `manifest.csv` and `networks/<id>.edges` under `out_dir` and
/// returns the manifest path.
pub fn generate_corpus(config: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    let items = generate_networks(config)?;
    let net_dir = out_dir.join("networks");
    std::fs::create_dir_all(&net_dir).map_err(|e| Error::io(&net_dir, e))?;
    let mut records = Vec::with_capacity(items.len());
    for (record, net) in items {
        let path = out_dir.join(&record.network_path);
        std::fs::write(&path, write_edge_list(&net)?).map_err(|e| Error::io(&path, e))?;
        records.push(record);
    }
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}
