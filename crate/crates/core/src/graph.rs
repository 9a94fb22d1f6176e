//! Directed follow graphs, ego networks, and their k-core reduction.
//!
//! Vertices are opaque string tokens interned to dense indices in order of
//! first appearance. Adjacency lists are kept sorted, so iteration order is a
//! function of the input alone.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A simple directed graph: no self-loops, no parallel edges.
#[derive(Debug, Clone, Default)]
pub struct DirectedGraph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph from labelled edges. Endpoints are added to the vertex
    /// set on first sight; duplicate edges collapse.
    pub fn from_edges<S, I>(vertices: impl IntoIterator<Item = S>, edges: I) -> Result<Self>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, S)>,
    {
        let mut b = GraphBuilder::default();
        for v in vertices {
            b.vertex(v.as_ref());
        }
        for (src, dst) in edges {
            b.edge(src.as_ref(), dst.as_ref())?;
        }
        Ok(b.build())
    }

    /// Builds a graph over vertices `0..n` labelled by their index.
    pub fn from_indexed_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = GraphBuilder::default();
        for i in 0..n {
            b.vertex(&i.to_string());
        }
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::argument(format!("edge ({u},{v}) outside 0..{n}")));
            }
            b.edge_by_index(u, v)?;
        }
        Ok(b.build())
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Vertices followed by `v`, ascending.
    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }

    /// Vertices following `v`, ascending.
    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_adj[v].len()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_adj[v].len()
    }

    pub fn total_degree(&self, v: usize) -> usize {
        self.out_adj[v].len() + self.in_adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_adj[u].binary_search(&v).is_ok()
    }

    /// Edges as index pairs, ordered by source then target.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, succ)| succ.iter().map(move |&v| (u, v)))
    }

    /// Label-level edge set, for comparing graphs built with different
    /// vertex orders.
    pub fn edge_set(&self) -> BTreeSet<(&str, &str)> {
        self.edges()
            .map(|(u, v)| (self.labels[u].as_str(), self.labels[v].as_str()))
            .collect()
    }

    pub fn vertex_set(&self) -> BTreeSet<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    /// Induced subgraph on the vertices with `keep[v] == true`, preserving
    /// their relative order. Returns the old-to-new index map as well.
    pub fn induced_subgraph(&self, keep: &[bool]) -> (DirectedGraph, Vec<Option<usize>>) {
        let mut map = vec![None; self.vertex_count()];
        let mut b = GraphBuilder::default();
        for (v, &k) in keep.iter().enumerate() {
            if k {
                map[v] = Some(b.vertex(&self.labels[v]));
            }
        }
        for (u, v) in self.edges() {
            if let (Some(nu), Some(nv)) = (map[u], map[v]) {
                // Endpoints are distinct and edges unique in the source graph.
                b.edge_by_index(nu, nv).expect("subgraph of a simple graph");
            }
        }
        (b.build(), map)
    }

    /// Undirected projection: `{u, v}` is present iff `u→v` or `v→u` is.
    pub fn undirected(&self) -> UndirectedGraph {
        let adj = (0..self.vertex_count())
            .map(|v| {
                let mut nbrs: Vec<usize> = self.out_adj[v]
                    .iter()
                    .chain(self.in_adj[v].iter())
                    .copied()
                    .collect();
                nbrs.sort_unstable();
                nbrs.dedup();
                nbrs
            })
            .collect();
        UndirectedGraph::from_adjacency(adj)
    }
}

#[derive(Default)]
struct GraphBuilder {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl GraphBuilder {
    fn vertex(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    fn edge(&mut self, src: &str, dst: &str) -> Result<()> {
        if src == dst {
            return Err(Error::data(format!("self-loop on vertex {src:?}")));
        }
        let u = self.vertex(src);
        let v = self.vertex(dst);
        self.edges.insert((u, v));
        Ok(())
    }

    fn edge_by_index(&mut self, u: usize, v: usize) -> Result<()> {
        if u == v {
            return Err(Error::data(format!("self-loop on vertex {:?}", self.labels[u])));
        }
        self.edges.insert((u, v));
        Ok(())
    }

    fn build(self) -> DirectedGraph {
        let n = self.labels.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        // BTreeSet iteration is sorted by (src, dst), so both lists come out sorted.
        for &(u, v) in &self.edges {
            out_adj[u].push(v);
            in_adj[v].push(u);
        }
        DirectedGraph {
            labels: self.labels,
            index: self.index,
            out_adj,
            in_adj,
            edge_count: self.edges.len(),
        }
    }
}

/// Symmetric view of a [`DirectedGraph`], sharing its vertex indices.
#[derive(Debug, Clone)]
pub struct UndirectedGraph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl UndirectedGraph {
    /// `adj` must be symmetric, sorted and loop-free.
    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        let ends: usize = adj.iter().map(Vec::len).sum();
        debug_assert!(ends.is_multiple_of(2), "adjacency is not symmetric");
        UndirectedGraph {
            adj,
            edge_count: ends / 2,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }
}

/// A directed graph with a distinguished focal vertex.
#[derive(Debug, Clone)]
pub struct EgoNetwork {
    graph: DirectedGraph,
    ego: usize,
}

impl EgoNetwork {
    pub fn new(graph: DirectedGraph, ego: usize) -> Result<Self> {
        if ego >= graph.vertex_count() {
            return Err(Error::argument(format!(
                "ego index {ego} outside a graph of {} vertices",
                graph.vertex_count()
            )));
        }
        Ok(EgoNetwork { graph, ego })
    }

    /// The degenerate network holding only the ego.
    pub fn singleton(label: &str) -> Self {
        let graph = DirectedGraph::from_edges([label], Vec::<(&str, &str)>::new())
            .expect("a single vertex has no edges");
        EgoNetwork { graph, ego: 0 }
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn ego(&self) -> usize {
        self.ego
    }

    pub fn ego_label(&self) -> &str {
        self.graph.label(self.ego)
    }
}

/// Parses the line-oriented edge-list format.
///
/// Each data line holds `src dst` separated by spaces or tabs. Lines whose
/// first non-blank character is `#` are comments, blank lines are skipped.
/// The source of the first data line is the ego.
pub fn parse_edge_list(text: &str) -> Result<EgoNetwork> {
    let mut b = GraphBuilder::default();
    let mut ego = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 tokens, found {}", tokens.len()),
            });
        }
        let (src, dst) = (tokens[0], tokens[1]);
        if src == dst {
            return Err(Error::data(format!("self-loop {src} {src} at line {line_no}")));
        }
        let u = b.vertex(src);
        ego.get_or_insert(u);
        let v = b.vertex(dst);
        b.edges.insert((u, v));
    }
    let ego = ego.ok_or_else(|| Error::data("edge list has no data lines; no ego derivable"))?;
    EgoNetwork::new(b.build(), ego)
}

/// Serializes an ego network to the edge-list format accepted by
/// [`parse_edge_list`]. The ego's own follows come first so that it is the
/// source of the first data line.
///
/// The format cannot express an ego without out-edges or isolated vertices,
/// so those networks are rejected.
pub fn write_edge_list(net: &EgoNetwork) -> Result<String> {
    let g = net.graph();
    let ego = net.ego();
    if g.out_degree(ego) == 0 {
        return Err(Error::argument(format!(
            "ego {:?} follows nobody; the edge-list format cannot name it",
            net.ego_label()
        )));
    }
    if let Some(v) = (0..g.vertex_count()).find(|&v| g.total_degree(v) == 0) {
        return Err(Error::argument(format!(
            "isolated vertex {:?} cannot be written as an edge",
            g.label(v)
        )));
    }
    let mut out = String::new();
    writeln!(
        out,
        "# ego {} vertices {} edges {}",
        net.ego_label(),
        g.vertex_count(),
        g.edge_count()
    )
    .unwrap();
    for &v in g.successors(ego) {
        writeln!(out, "{} {}", g.label(ego), g.label(v)).unwrap();
    }
    for (u, v) in g.edges().filter(|&(u, _)| u != ego) {
        writeln!(out, "{} {}", g.label(u), g.label(v)).unwrap();
    }
    Ok(out)
}

/// Default core order used by feature extraction.
pub const DEFAULT_CORE_K: usize = 2;

/// Reduces `net` to its `k`-core under total (in + out) degree.
///
/// Vertices with fewer than `k` incident edges are peeled until none remain.
/// If the ego is peeled it is put back together with its edges into the
/// surviving core, so the result is always a valid ego network.
pub fn k_core_reduce(net: &EgoNetwork, k: usize) -> EgoNetwork {
    let g = net.graph();
    let n = g.vertex_count();
    let mut degree: Vec<usize> = (0..n).map(|v| g.total_degree(v)).collect();
    let mut alive = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        alive[v] = false;
    }
    while let Some(v) = queue.pop_front() {
        for &w in g.successors(v).iter().chain(g.predecessors(v)) {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] < k {
                    alive[w] = false;
                    queue.push_back(w);
                }
            }
        }
    }
    alive[net.ego()] = true;
    let (core, map) = g.induced_subgraph(&alive);
    let ego = map[net.ego()].expect("ego is always kept");
    EgoNetwork { graph: core, ego }
}
