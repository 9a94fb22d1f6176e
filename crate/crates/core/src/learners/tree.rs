//! CART regression/classification trees.
//!
//! Splits are greedy and axis-aligned with midpoint thresholds. Candidate
//! features are scanned in ascending index order and thresholds in ascending
//! order; a candidate replaces the incumbent only if it is strictly better, so
//! ties resolve to the first feature and then the lowest threshold.
//!
//! Each feature keeps its own list of the node's samples sorted by value.
//! Splitting a node stably partitions every list, so no sorting happens
//! below the root.

use nalgebra::DMatrix;
use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Binary targets; weighted Gini impurity.
    Gini,
    /// Real targets; within-node sum of squares.
    Variance,
}

impl Criterion {
    /// Impurity of a node scaled by its sample count.
    fn weighted(self, n: f64, sum: f64, sum_sq: f64) -> f64 {
        match self {
            // n * 2p(1-p) with p = sum / n
            Criterion::Gini => 2.0 * sum * (n - sum) / n,
            Criterion::Variance => (sum_sq - sum * sum / n).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` tries all of them.
    pub features_per_split: Option<usize>,
}

/// Tree nodes in pre-order. A split's left child immediately follows it.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Rebuilds a tree from pre-order nodes, validating the structure.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Tree> {
        fn walk(nodes: &[Node], at: usize) -> Result<usize> {
            match nodes.get(at) {
                None => Err(Error::data("truncated tree")),
                Some(Node::Leaf(_)) => Ok(at + 1),
                Some(Node::Split { right, .. }) => {
                    let end_left = walk(nodes, at + 1)?;
                    if end_left != *right {
                        return Err(Error::data("tree right-child index mismatch"));
                    }
                    walk(nodes, end_left)
                }
            }
        }
        if walk(&nodes, 0)? != nodes.len() {
            return Err(Error::data("trailing tree nodes"));
        }
        Ok(Tree { nodes })
    }

    /// Predicts one row given a feature accessor.
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    at = if row(feature) <= threshold { at + 1 } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(|f| x[(i, f)])).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> (usize, usize) {
            match nodes[at] {
                Node::Leaf(_) => (0, at + 1),
                Node::Split { right, .. } => {
                    let (dl, _) = go(nodes, at + 1);
                    let (dr, end) = go(nodes, right);
                    (1 + dl.max(dr), end)
                }
            }
        }
        go(&self.nodes, 0).0
    }
}

/// Row orderings shared by every tree grown on the same training matrix.
pub struct Presorted {
    /// For each feature, row indices ordered by value (ties by row index).
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &DMatrix<f64>) -> Presorted {
        let order = (0..x.ncols())
            .map(|f| {
                let col = x.column(f);
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { order }
    }
}

/// Grows one tree on a multiset of rows, given as a per-row multiplicity.
pub fn grow(
    x: &DMatrix<f64>,
    y: &[f64],
    presorted: &Presorted,
    multiplicity: &[u32],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let p = x.ncols();
    // Expand the multiset into sample slots; slot s refers to row sample_row[s].
    let mut sample_row = Vec::new();
    let mut first_slot = vec![0u32; x.nrows()];
    for (row, &m) in multiplicity.iter().enumerate() {
        first_slot[row] = sample_row.len() as u32;
        sample_row.extend(std::iter::repeat_n(row as u32, m as usize));
    }
    let lists: Vec<Vec<u32>> = presorted
        .order
        .iter()
        .map(|ord| {
            let mut l = Vec::with_capacity(sample_row.len());
            for &row in ord {
                let start = first_slot[row as usize];
                l.extend(start..start + multiplicity[row as usize]);
            }
            l
        })
        .collect();
    let n = sample_row.len();
    let mut b = Builder {
        columns: (0..p).map(|f| x.column(f).as_slice().to_vec()).collect(),
        y,
        params,
        sample_row,
        lists,
        go_left: vec![false; n],
        scratch: Vec::with_capacity(n),
        nodes: Vec::new(),
        rng,
    };
    if n == 0 {
        return Tree {
            nodes: vec![Node::Leaf(0.0)],
        };
    }
    b.build(0, n, 0);
    Tree { nodes: b.nodes }
}

struct Builder<'a> {
    columns: Vec<Vec<f64>>,
    y: &'a [f64],
    params: &'a TreeParams,
    sample_row: Vec<u32>,
    lists: Vec<Vec<u32>>,
    go_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
    rng: &'a mut ChaCha8Rng,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn value(&self, f: usize, slot: u32) -> f64 {
        self.columns[f][self.sample_row[slot as usize] as usize]
    }

    fn target(&self, slot: u32) -> f64 {
        self.y[self.sample_row[slot as usize] as usize]
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) {
        let n = hi - lo;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for &s in &self.lists[0][lo..hi] {
            let t = self.target(s);
            sum += t;
            sum_sq += t * t;
        }
        let leaf = sum / n as f64;
        let impurity = self.params.criterion.weighted(n as f64, sum, sum_sq);
        let min_leaf = self.params.min_leaf.max(1);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < 2 * min_leaf || impurity <= 0.0 {
            self.nodes.push(Node::Leaf(leaf));
            return;
        }

        let Some(best) = self.best_split(lo, hi, sum, sum_sq, impurity) else {
            self.nodes.push(Node::Leaf(leaf));
            return;
        };

        // Route samples, then stably partition every feature list.
        let mut n_left = 0;
        for &s in &self.lists[best.feature][lo..hi] {
            let left = self.value(best.feature, s) <= best.threshold;
            self.go_left[s as usize] = left;
            n_left += usize::from(left);
        }
        for f in 0..self.lists.len() {
            self.scratch.clear();
            let list = &mut self.lists[f];
            let mut w = lo;
            for k in lo..hi {
                let s = list[k];
                if self.go_left[s as usize] {
                    list[w] = s;
                    w += 1;
                } else {
                    self.scratch.push(s);
                }
            }
            list[w..hi].copy_from_slice(&self.scratch);
        }

        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            right: 0,
        });
        self.build(lo, lo + n_left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.build(lo + n_left, hi, depth + 1);
    }

    fn best_split(&mut self, lo: usize, hi: usize, sum: f64, sum_sq: f64, parent: f64) -> Option<Candidate> {
        let p = self.lists.len();
        let features: Vec<usize> = match self.params.features_per_split {
            Some(m) if m < p => {
                let mut f = index::sample(self.rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let n = hi - lo;
        let min_leaf = self.params.min_leaf.max(1);
        let crit = self.params.criterion;
        let tol = 1e-12 * parent.max(1.0);
        let mut best: Option<Candidate> = None;

        for f in features {
            let list = &self.lists[f][lo..hi];
            let (mut ls, mut lss) = (0.0, 0.0);
            for k in 1..n {
                let prev = list[k - 1];
                let t = self.target(prev);
                ls += t;
                lss += t * t;
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let a = self.value(f, prev);
                let b = self.value(f, list[k]);
                if a >= b {
                    continue;
                }
                let nl = k as f64;
                let nr = (n - k) as f64;
                let imp = crit.weighted(nl, ls, lss) + crit.weighted(nr, sum - ls, sum_sq - lss);
                if imp < parent - tol && best.as_ref().is_none_or(|c| imp < c.impurity) {
                    let mut threshold = a + (b - a) / 2.0;
                    // Adjacent floats can round the midpoint up to `b`.
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn params(criterion: Criterion, min_leaf: usize) -> TreeParams {
        TreeParams {
            criterion,
            min_leaf,
            max_depth: None,
            features_per_split: None,
        }
    }

    fn fit(x: &DMatrix<f64>, y: &[f64], p: &TreeParams) -> Tree {
        let pre = Presorted::new(x);
        grow(x, y, &pre, &vec![1; x.nrows()], p, &mut seed::rng(0))
    }

    #[test]
    fn separable_single_feature() {
        let x = DMatrix::from_column_slice(12, 1, &(0..12).map(|i| i as f64).collect::<Vec<_>>());
        let y: Vec<f64> = (0..12).map(|i| if i < 6 { 0.0 } else { 1.0 }).collect();
        let t = fit(&x, &y, &params(Criterion::Gini, 5));
        assert_eq!(t.predict(&x), y);
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 0,
                threshold: 5.5,
                right: 2
            }
        );
    }

    #[test]
    fn ties_prefer_first_feature() {
        // Both columns separate the classes identically.
        let col: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut data = col.clone();
        data.extend(&col);
        let x = DMatrix::from_column_slice(10, 2, &data);
        let y: Vec<f64> = (0..10).map(|i| f64::from(u8::from(i >= 5))).collect();
        let t = fit(&x, &y, &params(Criterion::Gini, 1));
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn min_leaf_blocks_small_splits() {
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let t = fit(&x, &y, &params(Criterion::Gini, 5));
        assert_eq!(t.nodes(), &[Node::Leaf(0.5)]);
    }

    #[test]
    fn depth_limit() {
        let x = DMatrix::from_column_slice(8, 1, &[0., 1., 2., 3., 4., 5., 6., 7.]);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mut p = params(Criterion::Variance, 1);
        p.max_depth = Some(1);
        let t = fit(&x, &y, &p);
        assert!(t.depth() <= 1);
    }

    #[test]
    fn variance_leaves_are_means() {
        let x = DMatrix::from_column_slice(10, 1, &(0..10).map(f64::from).collect::<Vec<_>>());
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 3.0 }).collect();
        let t = fit(&x, &y, &params(Criterion::Variance, 2));
        assert_eq!(t.predict(&x), y);
    }

    #[test]
    fn multiplicity_acts_as_weights() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let pre = Presorted::new(&x);
        let t = grow(
            &x,
            &y,
            &pre,
            &[3, 0, 0, 1],
            &params(Criterion::Gini, 1),
            &mut seed::rng(0),
        );
        // Only rows 0 (x3) and 3 are present; leaf means reflect the weights.
        assert_eq!(t.predict_row(|_| 0.0), 0.0);
        assert_eq!(t.predict_row(|_| 3.0), 1.0);
        let t = grow(
            &x,
            &y,
            &pre,
            &[3, 0, 0, 1],
            &params(Criterion::Gini, 2),
            &mut seed::rng(0),
        );
        assert_eq!(t.nodes(), &[Node::Leaf(0.25)]);
    }

    #[test]
    fn from_nodes_validates() {
        let good = vec![
            Node::Split {
                feature: 0,
                threshold: 1.0,
                right: 2,
            },
            Node::Leaf(0.0),
            Node::Leaf(1.0),
        ];
        assert!(Tree::from_nodes(good).is_ok());
        let bad = vec![
            Node::Split {
                feature: 0,
                threshold: 1.0,
                right: 3,
            },
            Node::Leaf(0.0),
            Node::Leaf(1.0),
        ];
        assert!(Tree::from_nodes(bad).is_err());
        assert!(Tree::from_nodes(vec![]).is_err());
    }
}
