//! Synthetic corpora so the full experiment suite runs without downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{degree_one_hot, Dataset, Graph};
use crate::scalar::Scalar;

/// Default smoke-corpus size.
pub const SMOKE_GRAPHS: usize = 200;

/// Two-class smoke corpus: label 0 graphs are random trees, label 1 graphs
/// are built from 6-node rings joined by bridges with pendant attachments.
/// Every graph has girth at least 6, so no triangle or 4-node cyclic motif
/// appears anywhere in the corpus. Features are a degree one-hot (cap 10).
pub fn smoke_corpus<S: Scalar>(num_graphs: usize, seed: u64) -> Dataset<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = num_graphs / 2;
    let mut graphs = Vec::with_capacity(num_graphs);
    for i in 0..num_graphs {
        let n = rng.gen_range(10..=20);
        let g: Graph<S> = if i < half {
            random_tree(n, &mut rng)
        } else {
            ring_rich(n, &mut rng)
        };
        graphs.push(degree_one_hot(&g, 10).with_label(usize::from(i >= half)));
    }
    Dataset::new("smoke", graphs, 2).expect("generator output is valid")
}

/// Trees-only corpus for the motif-vs-attack scan: label 0 graphs are stars,
/// label 1 graphs are paths. Paths carry all of the corpus's 4-path counts,
/// so that motif dominates the target label; every cyclic motif is absent.
pub fn trees_corpus<S: Scalar>(num_graphs: usize, seed: u64) -> Dataset<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = num_graphs / 2;
    let mut graphs = Vec::with_capacity(num_graphs);
    for i in 0..num_graphs {
        let n = rng.gen_range(8..=14);
        let g: Graph<S> = if i < half {
            crate::graph::star_graph(n - 1)
        } else {
            crate::graph::path_graph(n)
        };
        graphs.push(degree_one_hot(&g, 10).with_label(usize::from(i >= half)));
    }
    Dataset::new("trees", graphs, 2).expect("generator output is valid")
}

fn random_tree<S: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Graph<S> {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (v, rng.gen_range(0..v))).collect();
    Graph::from_edges(n, edges).expect("attachment tree is valid")
}

/// `floor(n / 6)` disjoint 6-rings chained by bridge edges, remaining nodes
/// attached as pendants. Girth stays 6.
fn ring_rich<S: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Graph<S> {
    let rings = (n / 6).max(1);
    let ring_nodes = rings * 6;
    let mut edges = Vec::new();
    for r in 0..rings {
        let base = r * 6;
        for i in 0..6 {
            edges.push((base + i, base + (i + 1) % 6));
        }
        if r > 0 {
            edges.push((base - 6, base));
        }
    }
    for v in ring_nodes..n {
        edges.push((v, rng.gen_range(0..v)));
    }
    Graph::from_edges(n, edges).expect("ring construction is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::{dataset_distribution, MotifId};

    #[test]
    fn smoke_corpus_shape() {
        let d: Dataset<f64> = smoke_corpus(200, 7);
        assert_eq!(d.len(), 200);
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.feature_dim, 11);
        assert_eq!(d.graphs.iter().filter(|g| g.label() == Some(0)).count(), 100);
        for g in &d.graphs {
            assert!((10..=20).contains(&g.num_nodes()));
        }
    }

    #[test]
    fn smoke_corpus_has_no_small_cycles() {
        let d: Dataset<f64> = smoke_corpus(120, 3);
        let dist = dataset_distribution(&d, 1).unwrap();
        for id in [
            MotifId::M32,
            MotifId::M43,
            MotifId::M44,
            MotifId::M45,
            MotifId::M46,
        ] {
            assert!(dist.is_absent(id), "{id} must be absent");
        }
        // Trees and rings both contain 3-paths.
        assert!(!dist.is_absent(MotifId::M31));
    }

    #[test]
    fn smoke_corpus_is_deterministic() {
        let a: Dataset<f64> = smoke_corpus(50, 11);
        let b: Dataset<f64> = smoke_corpus(50, 11);
        for (x, y) in a.graphs.iter().zip(&b.graphs) {
            assert_eq!(x.edges(), y.edges());
            assert_eq!(x.label(), y.label());
        }
    }

    #[test]
    fn trees_corpus_plants_four_paths_in_the_target_label() {
        let d: Dataset<f64> = trees_corpus(60, 5);
        let dist = dataset_distribution(&d, 1).unwrap();
        assert!(dist.tar_avg(MotifId::M41) > 4.0);
        assert_eq!(dist.oth_avg(MotifId::M41), 0.0);
        assert!(dist.is_absent(MotifId::M32));
        assert!(dist.is_absent(MotifId::M46));
    }
}
