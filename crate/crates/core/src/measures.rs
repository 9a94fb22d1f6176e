//! Structural measures of ego networks and the 33-column feature vector.
//!
//! Clustering, assortativity and articulation points are computed on the
//! undirected projection; the remaining measures use edge direction. Every
//! measure that would divide by zero on a degenerate graph is defined as 0.

use crate::error::{Error, Result};
use crate::graph::{k_core_reduce, DirectedGraph, EgoNetwork, UndirectedGraph};

/// Which incident edges count towards a degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeMode {
    In,
    Out,
    Total,
}

impl DegreeMode {
    fn of(self, g: &DirectedGraph, v: usize) -> usize {
        match self {
            DegreeMode::In => g.in_degree(v),
            DegreeMode::Out => g.out_degree(v),
            DegreeMode::Total => g.total_degree(v),
        }
    }
}

/// Transitivity: closed length-2 paths over all length-2 paths.
pub fn global_clustering(g: &UndirectedGraph) -> f64 {
    let mut closed = 0usize;
    let mut triples = 0usize;
    let mut mark = vec![false; g.vertex_count()];
    for v in 0..g.vertex_count() {
        let d = g.degree(v);
        triples += d * d.saturating_sub(1) / 2;
        closed += links_among_neighbors(g, v, &mut mark);
    }
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}

/// Local clustering of `v`; 0 when `v` has fewer than two neighbours.
pub fn local_clustering(g: &UndirectedGraph, v: usize) -> Result<f64> {
    if v >= g.vertex_count() {
        return Err(Error::argument(format!("unknown vertex index {v}")));
    }
    let d = g.degree(v);
    if d < 2 {
        return Ok(0.0);
    }
    let mut mark = vec![false; g.vertex_count()];
    let links = links_among_neighbors(g, v, &mut mark);
    Ok(links as f64 / (d * (d - 1) / 2) as f64)
}

/// Number of edges between neighbours of `v`. `mark` must be all-false on
/// entry and is restored before returning.
fn links_among_neighbors(g: &UndirectedGraph, v: usize, mark: &mut [bool]) -> usize {
    let nbrs = g.neighbors(v);
    for &u in nbrs {
        mark[u] = true;
    }
    let mut links = 0;
    for &u in nbrs {
        links += g.neighbors(u).iter().filter(|&&w| w > u && mark[w]).count();
    }
    for &u in nbrs {
        mark[u] = false;
    }
    links
}

/// Directed density `|E| / (n (n - 1))`.
pub fn density(g: &DirectedGraph) -> f64 {
    let n = g.vertex_count();
    if n <= 1 {
        return 0.0;
    }
    g.edge_count() as f64 / (n * (n - 1)) as f64
}

/// Share of edges whose reverse edge is also present.
pub fn reciprocity(g: &DirectedGraph) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let mutual = g.edges().filter(|&(u, v)| g.has_edge(v, u)).count();
    mutual as f64 / g.edge_count() as f64
}

/// Degree of the ego. Normalized values divide by the largest attainable
/// degree: `n - 1` for in/out, `2 (n - 1)` for total.
pub fn degree_centrality(net: &EgoNetwork, mode: DegreeMode, normalized: bool) -> f64 {
    let g = net.graph();
    let raw = mode.of(g, net.ego()) as f64;
    if !normalized {
        return raw;
    }
    let n = g.vertex_count();
    if n <= 1 {
        return 0.0;
    }
    let max = match mode {
        DegreeMode::Total => 2 * (n - 1),
        _ => n - 1,
    };
    raw / max as f64
}

/// Freeman degree centralization, scaled so the star configuration for the
/// given mode scores exactly 1.
pub fn degree_centralization(g: &DirectedGraph, mode: DegreeMode) -> f64 {
    let n = g.vertex_count();
    let denom = match mode {
        DegreeMode::Total if n > 2 => 2 * (n - 1) * (n - 2),
        DegreeMode::In | DegreeMode::Out if n > 1 => (n - 1) * (n - 1),
        _ => return 0.0,
    };
    let degrees: Vec<usize> = (0..n).map(|v| mode.of(g, v)).collect();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let spread: usize = degrees.iter().map(|&d| max - d).sum();
    spread as f64 / denom as f64
}

/// Degree assortativity: Pearson correlation between the degrees at the two
/// ends of each edge, with every edge counted in both orientations.
pub fn assortativity(g: &UndirectedGraph) -> f64 {
    if g.edge_count() < 2 {
        return 0.0;
    }
    // Both orientations share a marginal, so r = (E[xy] - E[x]^2) / Var[x].
    let m = (2 * g.edge_count()) as f64;
    let mut sum_x = 0.0;
    let mut sum_x2 = 0.0;
    let mut sum_xy = 0.0;
    for (u, v) in g.edges() {
        let du = g.degree(u) as f64;
        let dv = g.degree(v) as f64;
        sum_x += du + dv;
        sum_x2 += du * du + dv * dv;
        sum_xy += 2.0 * du * dv;
    }
    let mean = sum_x / m;
    let var = sum_x2 / m - mean * mean;
    if var <= 1e-12 * (1.0 + mean * mean) {
        return 0.0;
    }
    let r = (sum_xy / m - mean * mean) / var;
    r.clamp(-1.0, 1.0)
}

/// Counts cut vertices with an iterative low-link depth-first search.
pub fn articulation_point_count(g: &UndirectedGraph) -> usize {
    articulation_points(g).iter().filter(|&&a| a).count()
}

/// Flags each vertex whose removal disconnects its component.
pub fn articulation_points(g: &UndirectedGraph) -> Vec<bool> {
    const UNSEEN: usize = usize::MAX;
    let n = g.vertex_count();
    let mut disc = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut is_cut = vec![false; n];
    let mut timer = 0;
    // (vertex, parent, next neighbour position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    for root in 0..n {
        if disc[root] != UNSEEN {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        let mut root_children = 0;
        stack.push((root, UNSEEN, 0));
        while let Some(&mut (v, parent, ref mut pos)) = stack.last_mut() {
            if let Some(&w) = g.neighbors(v).get(*pos) {
                *pos += 1;
                if w == parent {
                    continue;
                }
                if disc[w] == UNSEEN {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    if v == root {
                        root_children += 1;
                    }
                    stack.push((w, v, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if parent != UNSEEN {
                    low[parent] = low[parent].min(low[v]);
                    if parent != root && low[v] >= disc[parent] {
                        is_cut[parent] = true;
                    }
                }
            }
        }
        if root_children > 1 {
            is_cut[root] = true;
        }
    }
    is_cut
}

/// The 17 measures computed on one network, in feature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkMeasures {
    pub vertex_count: f64,
    pub edge_count: f64,
    pub global_clustering: f64,
    pub local_clustering_ego: f64,
    pub centralization_in: f64,
    pub centralization_out: f64,
    pub centralization_total: f64,
    pub ego_in_degree: f64,
    pub ego_out_degree: f64,
    pub ego_total_degree: f64,
    pub ego_in_degree_norm: f64,
    pub ego_out_degree_norm: f64,
    pub ego_total_degree_norm: f64,
    pub density: f64,
    pub reciprocity: f64,
    pub assortativity: f64,
    pub articulation_points: f64,
}

/// Measure names shared by the full and reduced networks.
pub const MEASURE_NAMES: [&str; 17] = [
    "vertex_count",
    "edge_count",
    "global_clustering",
    "local_clustering_ego",
    "centralization_in",
    "centralization_out",
    "centralization_total",
    "ego_in_degree",
    "ego_out_degree",
    "ego_total_degree",
    "ego_in_degree_norm",
    "ego_out_degree_norm",
    "ego_total_degree_norm",
    "density",
    "reciprocity",
    "assortativity",
    "articulation_points",
];

/// The reduced network's ego follows only core members, so its raw
/// out-degree carries no information and is left out.
const DROPPED_CORE_MEASURE: &str = "ego_out_degree";

pub const FEATURE_COUNT: usize = 33;

/// Stable column names of a [`FeatureVector`].
pub fn feature_names() -> Vec<String> {
    let full = MEASURE_NAMES.iter().map(|m| format!("full_{m}"));
    let core = MEASURE_NAMES
        .iter()
        .filter(|&&m| m != DROPPED_CORE_MEASURE)
        .map(|m| format!("core_{m}"));
    full.chain(core).collect()
}

impl NetworkMeasures {
    pub fn compute(net: &EgoNetwork) -> Self {
        let g = net.graph();
        let ug = g.undirected();
        let ego = net.ego();
        NetworkMeasures {
            vertex_count: g.vertex_count() as f64,
            edge_count: g.edge_count() as f64,
            global_clustering: global_clustering(&ug),
            local_clustering_ego: local_clustering(&ug, ego).expect("ego is a vertex"),
            centralization_in: degree_centralization(g, DegreeMode::In),
            centralization_out: degree_centralization(g, DegreeMode::Out),
            centralization_total: degree_centralization(g, DegreeMode::Total),
            ego_in_degree: degree_centrality(net, DegreeMode::In, false),
            ego_out_degree: degree_centrality(net, DegreeMode::Out, false),
            ego_total_degree: degree_centrality(net, DegreeMode::Total, false),
            ego_in_degree_norm: degree_centrality(net, DegreeMode::In, true),
            ego_out_degree_norm: degree_centrality(net, DegreeMode::Out, true),
            ego_total_degree_norm: degree_centrality(net, DegreeMode::Total, true),
            density: density(g),
            reciprocity: reciprocity(g),
            assortativity: assortativity(&ug),
            articulation_points: articulation_point_count(&ug) as f64,
        }
    }

    /// Values in [`MEASURE_NAMES`] order.
    pub fn values(&self) -> [f64; 17] {
        [
            self.vertex_count,
            self.edge_count,
            self.global_clustering,
            self.local_clustering_ego,
            self.centralization_in,
            self.centralization_out,
            self.centralization_total,
            self.ego_in_degree,
            self.ego_out_degree,
            self.ego_total_degree,
            self.ego_in_degree_norm,
            self.ego_out_degree_norm,
            self.ego_total_degree_norm,
            self.density,
            self.reciprocity,
            self.assortativity,
            self.articulation_points,
        ]
    }
}

/// Measures of the full network followed by those of its k-core.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_measures(full: &NetworkMeasures, core: &NetworkMeasures) -> Self {
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        values.extend(full.values());
        values.extend(
            MEASURE_NAMES
                .iter()
                .zip(core.values())
                .filter(|(name, _)| **name != DROPPED_CORE_MEASURE)
                .map(|(_, v)| v),
        );
        debug_assert_eq!(values.len(), FEATURE_COUNT);
        FeatureVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Extracts the feature vector of `net` using its `k`-core as the reduced view.
pub fn feature_vector(net: &EgoNetwork, k: usize) -> FeatureVector {
    let full = NetworkMeasures::compute(net);
    let core = NetworkMeasures::compute(&k_core_reduce(net, k));
    FeatureVector::from_measures(&full, &core)
}
