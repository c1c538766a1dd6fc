use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Borrowed row-major design matrix.
#[derive(Clone, Copy, Debug)]
pub struct Dataset<'a> {
    values: &'a [f64],
    n_rows: usize,
    n_cols: usize,
}

impl<'a> Dataset<'a> {
    pub fn new(values: &'a [f64], n_rows: usize, n_cols: usize) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch { expected: n_rows * n_cols, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training features"));
        }
        Ok(Self { values, n_rows, n_cols })
    }

    pub fn from_features(x: &'a FeatureMatrix) -> Result<Self> {
        Self::new(x.values(), x.n_rows(), x.n_cols())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols + c]
    }

    pub fn row(&self, r: usize) -> &'a [f64] {
        &self.values[r * self.n_cols..(r + 1) * self.n_cols]
    }
}

/// Per-feature sample order, computed once and shared by every tree of an
/// ensemble.
#[derive(Clone, Debug)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(data: &Dataset<'_>) -> Self {
        let order = (0..data.n_cols())
            .map(|c| {
                let mut idx: Vec<u32> = (0..data.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    data.get(a as usize, c).total_cmp(&data.get(b as usize, c)).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 4, min_samples_leaf: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub(crate) fn set_leaf(&mut self, node: usize, value: f64) {
        self.nodes[node] = Node::Leaf { value };
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Scan {
    sum: f64,
    count: usize,
    last: f64,
    started: bool,
}

const NO_NODE: u32 = u32::MAX;

/// Greedy CART regression tree on variance reduction.
///
/// Ties are broken towards the lowest feature index, then the lowest
/// threshold. Returns the tree and the leaf node reached by each row.
pub(crate) fn grow_tree(
    data: &Dataset<'_>,
    sorted: &Presorted,
    target: &[f64],
    params: &TreeParams,
) -> Result<(RegressionTree, Vec<usize>)> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Empty("tree training rows"));
    }
    if target.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: target.len() });
    }
    let min_leaf = params.min_samples_leaf.max(1);

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // node owning each sample while it is still splittable
    let mut node_of = vec![0u32; n];
    let mut totals: Vec<(f64, usize)> = vec![(target.iter().sum(), n)];
    let mut active: Vec<usize> = vec![0];
    let mut leaf_of = vec![0usize; n];

    for _depth in 0..params.max_depth {
        if active.is_empty() {
            break;
        }
        // slot per active node
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &nd) in active.iter().enumerate() {
            slot[nd] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; active.len()];
        for (f, order) in sorted.order.iter().enumerate() {
            let mut scan = vec![Scan::default(); active.len()];
            for &i in order {
                let nd = node_of[i as usize];
                if nd == NO_NODE || slot[nd as usize] == usize::MAX {
                    continue;
                }
                let s = slot[nd as usize];
                let v = data.get(i as usize, f);
                let st = &mut scan[s];
                if st.started && v > st.last {
                    let (tsum, tcount) = totals[nd as usize];
                    let (ls, lc) = (st.sum, st.count);
                    let rc = tcount - lc;
                    if lc >= min_leaf && rc >= min_leaf {
                        let rs = tsum - ls;
                        let gain = ls * ls / lc as f64 + rs * rs / rc as f64 - tsum * tsum / tcount as f64;
                        if best[s].map_or(true, |b| gain > b.gain) {
                            let mut threshold = 0.5 * (st.last + v);
                            if threshold >= v {
                                threshold = st.last;
                            }
                            best[s] = Some(Candidate { gain, feature: f, threshold });
                        }
                    }
                }
                st.sum += target[i as usize];
                st.count += 1;
                st.last = v;
                st.started = true;
            }
        }

        let mut next_active = Vec::new();
        let mut children = vec![(0usize, 0usize); active.len()];
        let mut split = vec![false; active.len()];
        for (s, &nd) in active.iter().enumerate() {
            let (tsum, tcount) = totals[nd];
            let tol = 1e-12 * (tsum * tsum / tcount as f64).abs().max(1e-300);
            if let Some(c) = best[s].filter(|c| c.gain > tol) {
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                totals.push((0.0, 0));
                totals.push((0.0, 0));
                nodes[nd] = Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                children[s] = (left, left + 1);
                split[s] = true;
                next_active.push(left);
                next_active.push(left + 1);
            }
        }
        for i in 0..n {
            let nd = node_of[i];
            if nd == NO_NODE {
                continue;
            }
            let s = slot[nd as usize];
            if s == usize::MAX {
                continue;
            }
            if !split[s] {
                leaf_of[i] = nd as usize;
                node_of[i] = NO_NODE;
                continue;
            }
            let Node::Split { feature, threshold, .. } = nodes[nd as usize] else { unreachable!() };
            let child = if data.get(i, feature) <= threshold { children[s].0 } else { children[s].1 };
            node_of[i] = child as u32;
            totals[child].0 += target[i];
            totals[child].1 += 1;
        }
        active = next_active;
    }
    for i in 0..n {
        if node_of[i] != NO_NODE {
            leaf_of[i] = node_of[i] as usize;
        }
    }

    // leaf means of the fitted target
    let mut sums = vec![(0.0, 0usize); nodes.len()];
    for i in 0..n {
        sums[leaf_of[i]].0 += target[i];
        sums[leaf_of[i]].1 += 1;
    }
    for (k, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            let (s, c) = sums[k];
            *value = if c > 0 { s / c as f64 } else { 0.0 };
        }
    }
    Ok((RegressionTree { nodes, max_depth: params.max_depth }, leaf_of))
}

/// Fits a single regression tree to `target` with leaf means.
pub fn fit_tree(x: &FeatureMatrix, target: &[f64], params: &TreeParams) -> Result<RegressionTree> {
    let data = Dataset::from_features(x)?;
    if data.n_rows() < params.min_samples_leaf.max(1) {
        return Err(Error::invalid("fewer rows than min_samples_leaf"));
    }
    let sorted = Presorted::new(&data);
    grow_tree(&data, &sorted, target, params).map(|(t, _)| t)
}
