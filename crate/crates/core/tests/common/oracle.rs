//! Brute-force reference implementations used to check the library.
//!
//! Graphs are plain `(n, directed edge list)` pairs. Everything here favours
//! obviousness over speed: triples are enumerated, cut vertices are found by
//! deleting each vertex and recounting components, correlations are computed
//! from explicit value lists.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

pub struct Graph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Graph {
        Graph {
            n,
            edges: edges.into_iter().filter(|(u, v)| u != v).collect(),
        }
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        u != v && (self.edges.contains(&(u, v)) || self.edges.contains(&(v, u)))
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).count()
    }

    pub fn undirected_degree(&self, v: usize) -> usize {
        (0..self.n).filter(|&u| self.adjacent(u, v)).count()
    }
}

pub fn transitivity(g: &Graph) -> f64 {
    let mut triangles = 0usize;
    let mut paths = 0usize;
    for a in 0..g.n {
        for b in (a + 1)..g.n {
            for c in (b + 1)..g.n {
                let (ab, bc, ac) = (g.adjacent(a, b), g.adjacent(b, c), g.adjacent(a, c));
                if ab && bc && ac {
                    triangles += 1;
                }
                // Each vertex of the triple may be the centre of a path.
                paths += usize::from(ab && ac) + usize::from(ab && bc) + usize::from(ac && bc);
            }
        }
    }
    if paths == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / paths as f64
    }
}

pub fn local_clustering(g: &Graph, v: usize) -> f64 {
    let nbrs: Vec<usize> = (0..g.n).filter(|&u| g.adjacent(u, v)).collect();
    let d = nbrs.len();
    if d < 2 {
        return 0.0;
    }
    let mut linked = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            if g.adjacent(nbrs[i], nbrs[j]) {
                linked += 1;
            }
        }
    }
    linked as f64 / (d * (d - 1) / 2) as f64
}

pub fn density(g: &Graph) -> f64 {
    if g.n < 2 {
        return 0.0;
    }
    g.edges.len() as f64 / (g.n * (g.n - 1)) as f64
}

pub fn reciprocity(g: &Graph) -> f64 {
    if g.edges.is_empty() {
        return 0.0;
    }
    let mutual = g
        .edges
        .iter()
        .filter(|&&(u, v)| g.edges.contains(&(v, u)))
        .count();
    mutual as f64 / g.edges.len() as f64
}

/// Freeman centralization: spread of degrees around the maximum divided by
/// the spread of a star with the same vertex count.
pub fn centralization(g: &Graph, degree: impl Fn(usize) -> usize, star_spread: f64) -> f64 {
    if star_spread <= 0.0 {
        return 0.0;
    }
    let degs: Vec<usize> = (0..g.n).map(degree).collect();
    let max = *degs.iter().max().unwrap_or(&0);
    degs.iter().map(|&d| (max - d) as f64).sum::<f64>() / star_spread
}

/// Star spreads: an in-star or out-star has one vertex of degree n-1 and
/// n-1 of degree 1; for total degree the best star has a hub with all
/// 2(n-1) possible edges and leaves of degree 2.
pub fn star_spread_in_out(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ((n - 1) * (n - 2)) as f64 + (n - 1) as f64
    }
}

pub fn star_spread_total(n: usize) -> f64 {
    if n < 3 {
        0.0
    } else {
        ((n - 1) * (2 * (n - 1) - 2)) as f64
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if vx <= 1e-12 || vy <= 1e-12 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// Degree correlation over undirected edges listed in both orientations.
pub fn assortativity(g: &Graph) -> f64 {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut m = 0;
    for u in 0..g.n {
        for v in 0..g.n {
            if g.adjacent(u, v) {
                xs.push(g.undirected_degree(u) as f64);
                ys.push(g.undirected_degree(v) as f64);
                if u < v {
                    m += 1;
                }
            }
        }
    }
    if m < 2 {
        return 0.0;
    }
    pearson(&xs, &ys).unwrap_or(0.0)
}

fn components(g: &Graph, removed: Option<usize>) -> usize {
    let mut seen = vec![false; g.n];
    if let Some(r) = removed {
        seen[r] = true;
    }
    let mut count = 0;
    for s in 0..g.n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for u in 0..g.n {
                if !seen[u] && g.adjacent(u, v) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

/// Vertices whose deletion leaves more components than before.
pub fn articulation_points(g: &Graph) -> usize {
    let base = components(g, None);
    (0..g.n)
        .filter(|&v| g.undirected_degree(v) > 0 && components(g, Some(v)) > base)
        .count()
}

/// Surviving vertex set of the k-core under total degree, ego restored.
pub fn k_core(g: &Graph, k: usize, ego: usize) -> BTreeSet<usize> {
    let mut alive: BTreeSet<usize> = (0..g.n).collect();
    loop {
        let weak = alive.iter().copied().find(|&v| {
            g.edges
                .iter()
                .filter(|&&(a, b)| (a == v && alive.contains(&b)) || (b == v && alive.contains(&a)))
                .count()
                < k
        });
        match weak {
            Some(v) => {
                alive.remove(&v);
            }
            None => break,
        }
    }
    alive.insert(ego);
    alive
}

/// The subgraph induced by `keep`, relabelled to `0..keep.len()` in
/// ascending order. Returns the new ego index too.
pub fn induced(g: &Graph, keep: &BTreeSet<usize>, ego: usize) -> (Graph, usize) {
    let order: Vec<usize> = keep.iter().copied().collect();
    let pos = |v: usize| order.iter().position(|&x| x == v).unwrap();
    let edges = g
        .edges
        .iter()
        .filter(|(u, v)| keep.contains(u) && keep.contains(v))
        .map(|&(u, v)| (pos(u), pos(v)));
    (Graph::new(order.len(), edges), pos(ego))
}

/// The 17 measures in library order, computed from definitions.
pub fn measures(g: &Graph, ego: usize) -> [f64; 17] {
    let n = g.n;
    let tot = |v: usize| g.in_degree(v) + g.out_degree(v);
    let norm = |d: usize, max: usize| if max == 0 { 0.0 } else { d as f64 / max as f64 };
    [
        n as f64,
        g.edges.len() as f64,
        transitivity(g),
        local_clustering(g, ego),
        centralization(g, |v| g.in_degree(v), star_spread_in_out(n)),
        centralization(g, |v| g.out_degree(v), star_spread_in_out(n)),
        centralization(g, tot, star_spread_total(n)),
        g.in_degree(ego) as f64,
        g.out_degree(ego) as f64,
        tot(ego) as f64,
        norm(g.in_degree(ego), n.saturating_sub(1)),
        norm(g.out_degree(ego), n.saturating_sub(1)),
        norm(tot(ego), 2 * n.saturating_sub(1)),
        density(g),
        reciprocity(g),
        assortativity(g),
        articulation_points(g) as f64,
    ]
}

/// Mann-Whitney statistic: share of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Best squared risk over the 0.01-resolution grid on the simplex, for up to
/// three columns.
pub fn grid_simplex_risk(z: &[Vec<f64>], y: &[f64]) -> f64 {
    let l = z.len();
    let risk = |w: &[f64]| {
        let n = y.len();
        (0..n)
            .map(|i| {
                let p: f64 = (0..l).map(|c| w[c] * z[c][i]).sum();
                (p - y[i]) * (p - y[i])
            })
            .sum::<f64>()
            / n as f64
    };
    let mut best = f64::INFINITY;
    match l {
        1 => best = risk(&[1.0]),
        2 => {
            for a in 0..=100 {
                let a = a as f64 / 100.0;
                best = best.min(risk(&[a, 1.0 - a]));
            }
        }
        3 => {
            for a in 0..=100 {
                for b in 0..=(100 - a) {
                    let (a, b) = (a as f64 / 100.0, b as f64 / 100.0);
                    best = best.min(risk(&[a, b, 1.0 - a - b]));
                }
            }
        }
        _ => panic!("grid oracle supports at most three columns"),
    }
    best
}
