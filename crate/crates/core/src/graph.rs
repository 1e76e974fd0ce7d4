//! Graph and dataset representation plus the elementary edits every other
//! module builds on: splitting, random generation, node dropping, induced
//! subgraphs.
//!
//! Graphs are immutable values. Every edit returns a new graph, which keeps
//! provenance through the poisoning pipeline trivial to reason about.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-loop ({0}, {0}) is not allowed")]
    SelfLoop(usize),
    #[error("feature matrix has {rows} rows but the graph has {nodes} nodes")]
    FeatureRowMismatch { rows: usize, nodes: usize },
    #[error("node id {0} out of range 0..{1}")]
    NodeOutOfRange(usize, usize),
    #[error("duplicate node id {0} in selection")]
    DuplicateNode(usize),
    #[error("graph label {label} outside 0..{num_classes}")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("graph {index} is unlabeled but the dataset requires labels")]
    MissingLabel { index: usize },
    #[error("graph {index} has feature dim {got}, dataset expects {expected}")]
    FeatureDimMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("split ratios must be positive and sum to 1 (got {0}, {1}, {2})")]
    BadSplitRatios(f64, f64, f64),
    #[error("dataset of {0} graphs is too small for three nonempty split parts")]
    DatasetTooSmall(usize),
    #[error("random graph needs at least 2 nodes (got {0})")]
    TooFewNodes(usize),
    #[error("edge probability {0} outside [0, 1]")]
    BadDensity(f64),
    #[error("soft-label row {row} sums to {sum}, expected 1")]
    BadSoftLabel { row: usize, sum: f64 },
}

/// Immutable undirected graph with per-node features and an optional class
/// label. Edges are stored as sorted `(u, v)` pairs with `u < v`; adjacency
/// lists are derived at construction so neighborhood walks stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<S> {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Matrix<S>,
    label: Option<usize>,
}

impl<S: Scalar> Graph<S> {
    /// Builds a graph, normalizing edge orientation and collapsing
    /// duplicates. Self-loops and out-of-range endpoints are rejected.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Matrix<S>,
        label: Option<usize>,
    ) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange(u, v, num_nodes));
            }
            set.insert((u.min(v), u.max(v)));
        }
        if features.rows() != num_nodes {
            return Err(GraphError::FeatureRowMismatch {
                rows: features.rows(),
                nodes: num_nodes,
            });
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            num_nodes,
            edges,
            adjacency,
            features,
            label,
        })
    }

    /// Graph with the given edges and an empty (`n x 0`) feature matrix.
    pub fn from_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(num_nodes, edges, Matrix::zeros(num_nodes, 0), None)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted `(u, v)` pairs with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &Matrix<S> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(&self, label: usize) -> Self {
        let mut g = self.clone();
        g.label = Some(label);
        g
    }

    pub fn with_features(&self, features: Matrix<S>) -> Result<Self, GraphError> {
        if features.rows() != self.num_nodes {
            return Err(GraphError::FeatureRowMismatch {
                rows: features.rows(),
                nodes: self.num_nodes,
            });
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    /// Dense symmetric adjacency matrix, materialized on demand.
    pub fn adjacency_matrix(&self) -> Matrix<S> {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &(u, v) in &self.edges {
            a.set(u, v, S::one());
            a.set(v, u, S::one());
        }
        a
    }

    /// Removes node `r` and its incident edges; remaining nodes are
    /// re-indexed preserving order, and the feature row is dropped.
    pub fn drop_node(&self, r: usize) -> Result<Self, GraphError> {
        if r >= self.num_nodes {
            return Err(GraphError::NodeOutOfRange(r, self.num_nodes));
        }
        let remap = |x: usize| if x > r { x - 1 } else { x };
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| u != r && v != r)
            .map(|&(u, v)| (remap(u), remap(v)));
        let mut features = Matrix::zeros(self.num_nodes - 1, self.features.cols());
        let mut row = 0;
        for i in 0..self.num_nodes {
            if i != r {
                features.row_mut(row).copy_from_slice(self.features.row(i));
                row += 1;
            }
        }
        Self::new(self.num_nodes - 1, edges, features, self.label)
    }

    /// Subgraph induced on `nodes`, preserving the listed node order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self, GraphError> {
        let mut position = vec![usize::MAX; self.num_nodes];
        for (i, &n) in nodes.iter().enumerate() {
            if n >= self.num_nodes {
                return Err(GraphError::NodeOutOfRange(n, self.num_nodes));
            }
            if position[n] != usize::MAX {
                return Err(GraphError::DuplicateNode(n));
            }
            position[n] = i;
        }
        let edges = self.edges.iter().filter_map(|&(u, v)| {
            let (pu, pv) = (position[u], position[v]);
            (pu != usize::MAX && pv != usize::MAX).then_some((pu, pv))
        });
        let mut features = Matrix::zeros(nodes.len(), self.features.cols());
        for (i, &n) in nodes.iter().enumerate() {
            features.row_mut(i).copy_from_slice(self.features.row(n));
        }
        Self::new(nodes.len(), edges, features, self.label)
    }
}

/// One-hot feature matrix from categorical per-node assignments.
pub fn one_hot_features<S: Scalar>(assignments: &[usize], dim: usize) -> Matrix<S> {
    let mut m = Matrix::zeros(assignments.len(), dim);
    for (i, &a) in assignments.iter().enumerate() {
        debug_assert!(a < dim);
        m.set(i, a, S::one());
    }
    m
}

/// Replaces a graph's features with a one-hot encoding of
/// `min(degree, max_degree)`, feature dim `max_degree + 1`.
pub fn degree_one_hot<S: Scalar>(graph: &Graph<S>, max_degree: usize) -> Graph<S> {
    let assignments: Vec<usize> = (0..graph.num_nodes())
        .map(|i| graph.degree(i).min(max_degree))
        .collect();
    graph
        .with_features(one_hot_features(&assignments, max_degree + 1))
        .expect("row count matches by construction")
}

/// Ordered collection of labeled graphs sharing a feature dimension.
#[derive(Debug, Clone)]
pub struct Dataset<S> {
    pub name: String,
    pub graphs: Vec<Graph<S>>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph<S>>,
        num_classes: usize,
    ) -> Result<Self, GraphError> {
        let feature_dim = graphs.first().map_or(0, Graph::feature_dim);
        for (index, g) in graphs.iter().enumerate() {
            match g.label() {
                None => return Err(GraphError::MissingLabel { index }),
                Some(label) if label >= num_classes => {
                    return Err(GraphError::LabelOutOfRange { label, num_classes })
                }
                Some(_) => {}
            }
            if g.feature_dim() != feature_dim {
                return Err(GraphError::FeatureDimMismatch {
                    index,
                    got: g.feature_dim(),
                    expected: feature_dim,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_classes,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Disjoint train/validation/test index lists into a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Seeded shuffled split. Part boundaries are the cumulative ratio products
/// rounded down, so `n = 1113` with `(0.75, 0.05, 0.20)` yields sizes
/// `(834, 56, 223)`.
pub fn split_dataset<S: Scalar>(
    dataset: &Dataset<S>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split, GraphError> {
    let (tr, va, te) = ratios;
    if tr <= 0.0 || va <= 0.0 || te <= 0.0 || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(GraphError::BadSplitRatios(tr, va, te));
    }
    let n = dataset.len();
    // +1e-9 absorbs representation error when a product lands on an integer.
    let b1 = ((n as f64) * tr + 1e-9).floor() as usize;
    let b2 = ((n as f64) * (tr + va) + 1e-9).floor() as usize;
    if b1 == 0 || b2 <= b1 || b2 >= n {
        return Err(GraphError::DatasetTooSmall(n));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates, explicit so the shuffle is stable across rand versions.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    Ok(Split {
        train_idx: indices[..b1].to_vec(),
        val_idx: indices[b1..b2].to_vec(),
        test_idx: indices[b2..].to_vec(),
    })
}

/// Erdos-Renyi draw: each of the `C(n, 2)` edges is included independently
/// with probability `density`. Features are left empty for the caller.
pub fn erdos_renyi_graph<S: Scalar>(
    n: usize,
    density: f64,
    seed: u64,
) -> Result<Graph<S>, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(GraphError::BadDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < density {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// The attacker-visible slice of the training data, with the soft labels
/// harvested from the target model once they exist.
#[derive(Debug, Clone)]
pub struct AvailableData<S> {
    pub graphs: Vec<Graph<S>>,
    pub soft_labels: Option<Matrix<S>>,
}

impl<S: Scalar> AvailableData<S> {
    pub fn new(graphs: Vec<Graph<S>>) -> Self {
        Self {
            graphs,
            soft_labels: None,
        }
    }

    /// Attaches confidence rows; each must be nonnegative and sum to 1.
    pub fn with_soft_labels(mut self, soft: Matrix<S>) -> Result<Self, GraphError> {
        for row in 0..soft.rows() {
            let mut sum = 0.0;
            for &v in soft.row(row) {
                let v = v.to_f64().unwrap_or(f64::NAN);
                if !(v >= 0.0) {
                    return Err(GraphError::BadSoftLabel { row, sum: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(GraphError::BadSoftLabel { row, sum });
            }
        }
        self.soft_labels = Some(soft);
        Ok(self)
    }
}

/// Path on `n` nodes: edges `(i, i+1)`.
pub fn path_graph<S: Scalar>(n: usize) -> Graph<S> {
    Graph::from_edges(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1))).expect("valid path")
}

/// Cycle on `n >= 3` nodes.
pub fn cycle_graph<S: Scalar>(n: usize) -> Graph<S> {
    assert!(n >= 3, "cycle needs at least 3 nodes");
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
}

/// Star with center 0 and `leaves` pendant nodes.
pub fn star_graph<S: Scalar>(leaves: usize) -> Graph<S> {
    Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("valid star")
}

/// Complete graph on `n` nodes.
pub fn complete_graph<S: Scalar>(n: usize) -> Graph<S> {
    Graph::from_edges(n, (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))))
        .expect("valid complete graph")
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = Graph<f64>;

    #[test]
    fn construction_normalizes_and_validates() {
        let g = G::from_edges(3, [(1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(matches!(
            G::from_edges(3, [(0, 0)]),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            G::from_edges(3, [(0, 5)]),
            Err(GraphError::EdgeOutOfRange(0, 5, 3))
        ));
    }

    #[test]
    fn adjacency_is_symmetric_with_zero_diagonal() {
        let g: G = erdos_renyi_graph(8, 0.5, 11).unwrap();
        let a = g.adjacency_matrix();
        for i in 0..8 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..8 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn drop_node_triangle_leaves_single_edge() {
        let g: G = cycle_graph(3);
        let h = g.drop_node(2).unwrap();
        assert_eq!(h.num_nodes(), 2);
        assert_eq!(h.edges(), &[(0, 1)]);
    }

    #[test]
    fn drop_node_path_center_isolates_endpoints() {
        let g: G = path_graph(3);
        let h = g.drop_node(1).unwrap();
        assert_eq!(h.num_nodes(), 2);
        assert_eq!(h.num_edges(), 0);
    }

    #[test]
    fn drop_node_on_five_cycle_gives_path() {
        let g: G = cycle_graph(5);
        for r in 0..5 {
            let h = g.drop_node(r).unwrap();
            assert_eq!(h.num_nodes(), 4);
            assert_eq!(h.num_edges(), 3);
            let mut degs: Vec<usize> = (0..4).map(|i| h.degree(i)).collect();
            degs.sort_unstable();
            assert_eq!(degs, vec![1, 1, 2, 2]);
        }
    }

    #[test]
    fn drop_node_out_of_range() {
        let g: G = path_graph(3);
        assert!(matches!(
            g.drop_node(3),
            Err(GraphError::NodeOutOfRange(3, 3))
        ));
    }

    #[test]
    fn induced_subgraph_examples() {
        let k4: G = complete_graph(4);
        let tri = k4.induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(tri.num_edges(), 3);

        let star: G = star_graph(3);
        let leaves = star.induced_subgraph(&[1, 2, 3]).unwrap();
        assert_eq!(leaves.num_edges(), 0);

        let c5: G = cycle_graph(5);
        let p = c5.induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(p.num_edges(), 2);
        assert!(p.has_edge(0, 1) && p.has_edge(1, 2));
    }

    #[test]
    fn induced_subgraph_rejects_duplicates() {
        let g: G = path_graph(4);
        assert!(matches!(
            g.induced_subgraph(&[0, 0]),
            Err(GraphError::DuplicateNode(0))
        ));
    }

    #[test]
    fn split_exact_proportions() {
        let d = toy_dataset(100);
        let s = split_dataset(&d, (0.75, 0.05, 0.20), 7).unwrap();
        assert_eq!(
            (s.train_idx.len(), s.val_idx.len(), s.test_idx.len()),
            (75, 5, 20)
        );
    }

    #[test]
    fn split_rounding_rule_on_1113() {
        let d = toy_dataset(1113);
        let s = split_dataset(&d, (0.75, 0.05, 0.20), 0).unwrap();
        assert_eq!(
            (s.train_idx.len(), s.val_idx.len(), s.test_idx.len()),
            (834, 56, 223)
        );
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy_dataset(50);
        let a = split_dataset(&d, (0.75, 0.05, 0.20), 42).unwrap();
        let b = split_dataset(&d, (0.75, 0.05, 0.20), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_partitions_disjoint_and_exhaustive_over_seeds() {
        let d = toy_dataset(37);
        for seed in 0..100 {
            let s = split_dataset(&d, (0.75, 0.05, 0.20), seed).unwrap();
            let mut all: Vec<usize> = s
                .train_idx
                .iter()
                .chain(&s.val_idx)
                .chain(&s.test_idx)
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..37).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_rejects_tiny_datasets_and_bad_ratios() {
        let d = toy_dataset(3);
        assert!(split_dataset(&d, (0.75, 0.05, 0.20), 0).is_err());
        let d = toy_dataset(100);
        assert!(split_dataset(&d, (0.5, 0.1, 0.1), 0).is_err());
    }

    #[test]
    fn erdos_renyi_extreme_densities() {
        let full: G = erdos_renyi_graph(4, 1.0, 0).unwrap();
        assert_eq!(full.num_edges(), 6);
        let empty: G = erdos_renyi_graph(4, 0.0, 0).unwrap();
        assert_eq!(empty.num_edges(), 0);
    }

    #[test]
    fn erdos_renyi_mean_edge_count_matches_binomial() {
        // E[edges] = C(4,2) * 0.8 = 4.8; SE of the mean over 10k trials is
        // sqrt(6 * 0.8 * 0.2 / 10000) ~ 0.0098, so +-0.1 is > 3 SE.
        let total: usize = (0..10_000)
            .map(|seed| {
                erdos_renyi_graph::<f64>(4, 0.8, seed)
                    .unwrap()
                    .num_edges()
            })
            .sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean - 4.8).abs() < 0.1, "mean edge count {mean}");
    }

    #[test]
    fn degree_one_hot_caps_at_max() {
        let g: G = star_graph(12);
        let f = degree_one_hot(&g, 10);
        assert_eq!(f.feature_dim(), 11);
        assert_eq!(f.features().get(0, 10), 1.0); // center degree 12, capped
        assert_eq!(f.features().get(1, 1), 1.0);
    }

    fn toy_dataset(n: usize) -> Dataset<f64> {
        let graphs = (0..n)
            .map(|i| path_graph::<f64>(3).with_label(i % 2))
            .collect();
        Dataset::new("toy", graphs, 2).unwrap()
    }
}
