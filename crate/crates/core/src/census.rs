//! Exact census of the eight connected 3- and 4-node motifs, plus per-label
//! distribution statistics over a dataset.
//!
//! Enumeration expands connected node sets through exclusive neighborhoods
//! anchored at the lowest node id, so every connected 3- or 4-set is visited
//! exactly once without touching the `C(n, k)` subset space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dataset, Graph};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("motif classification needs 3 or 4 nodes, got {0}")]
    WrongSize(usize),
    #[error("subgraph is disconnected")]
    Disconnected,
    #[error("no graph in the dataset carries label {0}")]
    NoTargetGraphs(usize),
}

/// The eight connected undirected motifs on 3 and 4 nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MotifId {
    /// Path on 3 nodes.
    M31,
    /// Triangle.
    M32,
    /// Path on 4 nodes.
    M41,
    /// Star with 3 leaves.
    M42,
    /// 4-cycle.
    M43,
    /// Paw: triangle with a pendant edge.
    M44,
    /// Diamond: K4 minus one edge.
    M45,
    /// K4.
    M46,
}

impl MotifId {
    pub const ALL: [MotifId; 8] = [
        MotifId::M31,
        MotifId::M32,
        MotifId::M41,
        MotifId::M42,
        MotifId::M43,
        MotifId::M44,
        MotifId::M45,
        MotifId::M46,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotifId::M31 => "M31",
            MotifId::M32 => "M32",
            MotifId::M41 => "M41",
            MotifId::M42 => "M42",
            MotifId::M43 => "M43",
            MotifId::M44 => "M44",
            MotifId::M45 => "M45",
            MotifId::M46 => "M46",
        }
    }

    pub fn parse(s: &str) -> Option<MotifId> {
        Self::ALL.iter().copied().find(|m| m.name() == s)
    }

    pub fn num_nodes(self) -> usize {
        match self {
            MotifId::M31 | MotifId::M32 => 3,
            _ => 4,
        }
    }

    pub fn num_edges(self) -> usize {
        match self {
            MotifId::M31 => 2,
            MotifId::M32 => 3,
            MotifId::M41 | MotifId::M42 => 3,
            MotifId::M43 | MotifId::M44 => 4,
            MotifId::M45 => 5,
            MotifId::M46 => 6,
        }
    }
}

impl std::fmt::Display for MotifId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical topology of a motif.
pub fn motif_graph<S: Scalar>(id: MotifId) -> Graph<S> {
    let edges: &[(usize, usize)] = match id {
        MotifId::M31 => &[(0, 1), (1, 2)],
        MotifId::M32 => &[(0, 1), (1, 2), (0, 2)],
        MotifId::M41 => &[(0, 1), (1, 2), (2, 3)],
        MotifId::M42 => &[(0, 1), (0, 2), (0, 3)],
        MotifId::M43 => &[(0, 1), (1, 2), (2, 3), (0, 3)],
        MotifId::M44 => &[(0, 1), (1, 2), (0, 2), (2, 3)],
        MotifId::M45 => &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)],
        MotifId::M46 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    };
    Graph::from_edges(id.num_nodes(), edges.iter().copied()).expect("canonical motifs are valid")
}

/// Identifies which motif a connected 3- or 4-node graph is isomorphic to.
/// Edge count plus maximum degree is a complete invariant at these sizes.
pub fn classify_connected<S: Scalar>(subgraph: &Graph<S>) -> Result<MotifId, CensusError> {
    let n = subgraph.num_nodes();
    if n != 3 && n != 4 {
        return Err(CensusError::WrongSize(n));
    }
    if !is_connected(subgraph) {
        return Err(CensusError::Disconnected);
    }
    let edges = subgraph.num_edges();
    let max_degree = (0..n).map(|i| subgraph.degree(i)).max().unwrap();
    Ok(classify_by_invariants(n, edges, max_degree))
}

fn classify_by_invariants(n: usize, edges: usize, max_degree: usize) -> MotifId {
    match (n, edges) {
        (3, 2) => MotifId::M31,
        (3, 3) => MotifId::M32,
        (4, 3) if max_degree == 3 => MotifId::M42,
        (4, 3) => MotifId::M41,
        (4, 4) if max_degree == 2 => MotifId::M43,
        (4, 4) => MotifId::M44,
        (4, 5) => MotifId::M45,
        (4, 6) => MotifId::M46,
        _ => unreachable!("connected graph on {n} nodes cannot have {edges} edges"),
    }
}

fn is_connected<S: Scalar>(graph: &Graph<S>) -> bool {
    let n = graph.num_nodes();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in graph.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Induced occurrence counts of each motif in one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotifCounts {
    counts: [u64; 8],
}

impl MotifCounts {
    pub fn get(&self, id: MotifId) -> u64 {
        self.counts[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MotifId, u64)> + '_ {
        MotifId::ALL.iter().map(|&m| (m, self.counts[m.index()]))
    }

    pub fn total_three_node(&self) -> u64 {
        self.get(MotifId::M31) + self.get(MotifId::M32)
    }

    pub fn total_four_node(&self) -> u64 {
        MotifId::ALL[2..].iter().map(|&m| self.get(m)).sum()
    }

    fn add(&mut self, other: &MotifCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Exact induced counts of the eight motifs.
pub fn count_motifs<S: Scalar>(graph: &Graph<S>) -> MotifCounts {
    let mut counts = MotifCounts::default();
    enumerate_connected_sets(graph, |set| {
        let (edges, max_degree) = set_invariants(graph, set);
        counts.counts[classify_by_invariants(set.len(), edges, max_degree).index()] += 1;
    });
    counts
}

fn set_invariants<S: Scalar>(graph: &Graph<S>, set: &[usize]) -> (usize, usize) {
    let mut degrees = [0usize; 4];
    let mut edges = 0;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            if graph.has_edge(set[i], set[j]) {
                edges += 1;
                degrees[i] += 1;
                degrees[j] += 1;
            }
        }
    }
    (edges, degrees.iter().copied().max().unwrap())
}

/// Visits every connected set of 3 and 4 nodes exactly once. Each set is
/// anchored at its minimum node id; extension candidates come from the
/// exclusive neighborhood of the newest member, restricted to ids above the
/// anchor.
fn enumerate_connected_sets<S: Scalar>(graph: &Graph<S>, mut visit: impl FnMut(&[usize])) {
    let n = graph.num_nodes();
    let mut closed = vec![false; n]; // member or adjacent to a member
    for root in 0..n {
        closed[root] = true;
        let mut marked = vec![root];
        let mut ext = Vec::new();
        for &u in graph.neighbors(root) {
            closed[u] = true;
            marked.push(u);
            if u > root {
                ext.push(u);
            }
        }
        let mut sub = vec![root];
        extend(graph, root, &mut sub, ext, &mut closed, &mut visit);
        for u in marked {
            closed[u] = false;
        }
    }
}

fn extend<S: Scalar>(
    graph: &Graph<S>,
    root: usize,
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    closed: &mut [bool],
    visit: &mut impl FnMut(&[usize]),
) {
    if sub.len() >= 3 {
        visit(sub);
        if sub.len() == 4 {
            return;
        }
    }
    while let Some(w) = ext.pop() {
        let mut child_ext = ext.clone();
        let mut marked = Vec::new();
        for &u in graph.neighbors(w) {
            if !closed[u] {
                closed[u] = true;
                marked.push(u);
                if u > root {
                    child_ext.push(u);
                }
            }
        }
        sub.push(w);
        extend(graph, root, sub, child_ext, closed, visit);
        sub.pop();
        for u in marked {
            closed[u] = false;
        }
    }
}

/// Mean per-graph motif counts of the target-label graphs vs. the rest,
/// plus the set of motifs absent from the whole dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifDistribution {
    pub target_label: usize,
    tar_avg: [f64; 8],
    oth_avg: [f64; 8],
    absent: [bool; 8],
}

impl MotifDistribution {
    pub fn tar_avg(&self, id: MotifId) -> f64 {
        self.tar_avg[id.index()]
    }

    pub fn oth_avg(&self, id: MotifId) -> f64 {
        self.oth_avg[id.index()]
    }

    pub fn is_absent(&self, id: MotifId) -> bool {
        self.absent[id.index()]
    }

    pub fn absent_in_dataset(&self) -> Vec<MotifId> {
        MotifId::ALL
            .iter()
            .copied()
            .filter(|&m| self.is_absent(m))
            .collect()
    }
}

/// Motif distribution split by target label. Per-graph counting fans out to
/// the rayon pool; the integer reduction is order-independent.
pub fn dataset_distribution<S: Scalar>(
    dataset: &Dataset<S>,
    target_label: usize,
) -> Result<MotifDistribution, CensusError> {
    let per_graph: Vec<(usize, MotifCounts)> = dataset
        .graphs
        .par_iter()
        .map(|g| (g.label().expect("dataset graphs are labeled"), count_motifs(g)))
        .collect();

    let mut tar_total = MotifCounts::default();
    let mut oth_total = MotifCounts::default();
    let mut n_tar = 0u64;
    let mut n_oth = 0u64;
    for (label, counts) in &per_graph {
        if *label == target_label {
            tar_total.add(counts);
            n_tar += 1;
        } else {
            oth_total.add(counts);
            n_oth += 1;
        }
    }
    if n_tar == 0 {
        return Err(CensusError::NoTargetGraphs(target_label));
    }

    let avg = |total: &MotifCounts, n: u64| {
        let mut out = [0.0; 8];
        if n > 0 {
            for (i, v) in total.counts.iter().enumerate() {
                out[i] = *v as f64 / n as f64;
            }
        }
        out
    };
    let mut absent = [false; 8];
    for (i, a) in absent.iter_mut().enumerate() {
        *a = tar_total.counts[i] + oth_total.counts[i] == 0;
    }
    Ok(MotifDistribution {
        target_label,
        tar_avg: avg(&tar_total, n_tar),
        oth_avg: avg(&oth_total, n_oth),
        absent,
    })
}
