//! Attack effectiveness and evasiveness metrics (success rate, mean
//! misclassification confidence, benign accuracy drop) and the
//! neighborhood-similarity link-pruning defense.

use rayon::prelude::*;
use thiserror::Error;

use crate::attack::{inject_trigger, AttackError, Placer, Trigger};
use crate::graph::{Graph, GraphError};
use crate::nn::{accuracy, forward, GnnModel, NnError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no test graph carries a non-target label")]
    EmptyAttackSet,
    #[error("similarity of a node with itself is undefined")]
    SameNode(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

/// One evaluation row: effectiveness (`asr`, `amc`) and evasiveness
/// (`bad`). `amc` is only defined when at least one attack succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow<S> {
    pub asr: f64,
    pub amc: Option<S>,
    pub bad: f64,
    pub benign_acc: f64,
    pub n_attacked: usize,
    pub n_success: usize,
}

impl<S: Scalar> MetricsRow<S> {
    /// Folds per-graph outcomes into a row. Each entry is
    /// `Some(target-class confidence)` for a successful flip, `None`
    /// otherwise.
    pub fn from_outcomes(
        outcomes: &[Option<S>],
        benign_acc: f64,
        backdoored_acc: f64,
    ) -> Result<Self, MetricsError> {
        if outcomes.is_empty() {
            return Err(MetricsError::EmptyAttackSet);
        }
        let n_attacked = outcomes.len();
        let successes: Vec<S> = outcomes.iter().flatten().copied().collect();
        let n_success = successes.len();
        let amc = (n_success > 0).then(|| {
            successes.iter().copied().fold(S::zero(), |a, b| a + b)
                / S::from_config(n_success as f64)
        });
        Ok(Self {
            asr: n_success as f64 / n_attacked as f64,
            amc,
            bad: benign_acc - backdoored_acc,
            benign_acc,
            n_attacked,
            n_success,
        })
    }
}

/// Evaluates a finished attack on the test set: every non-target graph is
/// patched through the attack's own placement policy and fed to the
/// backdoored model; clean accuracy of both models gives the drop.
pub fn evaluate_attack<S: Scalar>(
    backdoored: &GnnModel<S>,
    benign: &GnnModel<S>,
    test: &[(Graph<S>, usize)],
    trigger: &Trigger<S>,
    placer: &Placer<'_, S>,
    target_label: usize,
) -> Result<MetricsRow<S>, MetricsError> {
    evaluate_attack_inner(backdoored, benign, test, trigger, placer, target_label, None)
}

/// Same evaluation with the link-pruning defense applied to every inference
/// input, clean and triggered alike.
pub fn evaluate_attack_pruned<S: Scalar>(
    backdoored: &GnnModel<S>,
    benign: &GnnModel<S>,
    test: &[(Graph<S>, usize)],
    trigger: &Trigger<S>,
    placer: &Placer<'_, S>,
    target_label: usize,
    drop_fraction: f64,
) -> Result<MetricsRow<S>, MetricsError> {
    evaluate_attack_inner(
        backdoored,
        benign,
        test,
        trigger,
        placer,
        target_label,
        Some(drop_fraction),
    )
}

fn evaluate_attack_inner<S: Scalar>(
    backdoored: &GnnModel<S>,
    benign: &GnnModel<S>,
    test: &[(Graph<S>, usize)],
    trigger: &Trigger<S>,
    placer: &Placer<'_, S>,
    target_label: usize,
    defense: Option<f64>,
) -> Result<MetricsRow<S>, MetricsError> {
    let outcomes = attack_outcomes(backdoored, test, trigger, placer, target_label, defense)?;
    let prune = |g: &Graph<S>| match defense {
        Some(f) => jaccard_defense(g, f),
        None => g.clone(),
    };
    let clean: Vec<(Graph<S>, usize)> = test.iter().map(|(g, y)| (prune(g), *y)).collect();
    let benign_acc = accuracy(benign, &clean)?;
    let backdoored_acc = accuracy(backdoored, &clean)?;
    MetricsRow::from_outcomes(&outcomes, benign_acc, backdoored_acc)
}

/// Per-graph attack outcomes over the non-target test graphs:
/// `Some(target confidence)` when the patched graph flips to the target
/// label, `None` otherwise. Optionally prunes every patched input first.
pub fn attack_outcomes<S: Scalar>(
    backdoored: &GnnModel<S>,
    test: &[(Graph<S>, usize)],
    trigger: &Trigger<S>,
    placer: &Placer<'_, S>,
    target_label: usize,
    defense: Option<f64>,
) -> Result<Vec<Option<S>>, MetricsError> {
    let attacked: Vec<(usize, &Graph<S>)> = test
        .iter()
        .enumerate()
        .filter(|(_, (_, y))| *y != target_label)
        .map(|(i, (g, _))| (i, g))
        .collect();
    if attacked.is_empty() {
        return Err(MetricsError::EmptyAttackSet);
    }
    attacked
        .par_iter()
        .map(|&(ordinal, g)| {
            let patched = inject_trigger(g, trigger, &placer.place(g, trigger.num_nodes(), ordinal as u64)?)?;
            let patched = match defense {
                Some(f) => jaccard_defense(&patched, f),
                None => patched,
            };
            let pred = forward(backdoored, &patched)?;
            Ok((pred.argmax == target_label).then(|| pred.confidence(target_label)))
        })
        .collect()
}

/// Jaccard index of the structural neighborhoods of `u` and `v`, with the
/// endpoints themselves excluded; 0 when the union is empty.
pub fn jaccard_similarity<S: Scalar>(
    graph: &Graph<S>,
    u: usize,
    v: usize,
) -> Result<S, MetricsError> {
    let n = graph.num_nodes();
    if u >= n {
        return Err(GraphError::NodeOutOfRange(u, n).into());
    }
    if v >= n {
        return Err(GraphError::NodeOutOfRange(v, n).into());
    }
    if u == v {
        return Err(MetricsError::SameNode(u));
    }
    let nu: Vec<usize> = graph.neighbors(u).iter().copied().filter(|&x| x != v).collect();
    let nv: Vec<usize> = graph.neighbors(v).iter().copied().filter(|&x| x != u).collect();
    let mut intersection = 0usize;
    for x in &nu {
        if nv.binary_search(x).is_ok() {
            intersection += 1;
        }
    }
    let union = nu.len() + nv.len() - intersection;
    if union == 0 {
        return Ok(S::zero());
    }
    Ok(S::from_config(intersection as f64) / S::from_config(union as f64))
}

/// Inference-time defense: drops the `floor(drop_fraction * |E|)` edges with
/// the lowest endpoint-neighborhood similarity; ties at the threshold break
/// by lexicographic edge order.
pub fn jaccard_defense<S: Scalar>(graph: &Graph<S>, drop_fraction: f64) -> Graph<S> {
    assert!(
        (0.0..1.0).contains(&drop_fraction),
        "drop fraction must be in [0, 1)"
    );
    let to_drop = (drop_fraction * graph.num_edges() as f64).floor() as usize;
    if to_drop == 0 {
        return graph.clone();
    }
    let mut scored: Vec<((usize, usize), S)> = graph
        .edges()
        .iter()
        .map(|&(u, v)| {
            let sim = jaccard_similarity(graph, u, v).expect("edge endpoints are valid");
            ((u, v), sim)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("similarities are finite")
            .then(a.0.cmp(&b.0))
    });
    let kept = scored[to_drop..].iter().map(|&(e, _)| e);
    Graph::new(
        graph.num_nodes(),
        kept,
        graph.features().clone(),
        graph.label(),
    )
    .expect("pruning keeps a valid graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, cycle_graph, erdos_renyi_graph, star_graph};

    type G = Graph<f64>;

    #[test]
    fn metrics_row_formulas() {
        // 3 of 4 attacked graphs flip.
        let outcomes: [Option<f64>; 4] = [Some(0.9), Some(0.7), None, Some(0.8)];
        let row = MetricsRow::from_outcomes(&outcomes, 0.76, 0.74).unwrap();
        assert!((row.asr - 0.75).abs() < 1e-12);
        assert!((row.amc.unwrap() - 0.8).abs() < 1e-12);
        assert!((row.bad - 0.02).abs() < 1e-12);
        assert_eq!((row.n_attacked, row.n_success), (4, 3));

        // Mean confidence over the two stated successes.
        let row = MetricsRow::from_outcomes(&[Some(0.9), Some(0.7)], 1.0, 1.0).unwrap();
        assert!((row.amc.unwrap() - 0.8f64).abs() < 1e-12);

        // No successes leaves the confidence undefined.
        let row = MetricsRow::<f64>::from_outcomes(&[None, None], 0.5, 0.5).unwrap();
        assert_eq!(row.amc, None);
        assert_eq!(row.asr, 0.0);

        assert!(matches!(
            MetricsRow::<f64>::from_outcomes(&[], 0.5, 0.5),
            Err(MetricsError::EmptyAttackSet)
        ));
    }

    #[test]
    fn jaccard_similarity_examples() {
        // N(0) = {1,2,3}, N(5) = {2,3,4}: intersection 2, union 4.
        let g: G = G::from_edges(
            6,
            [(0, 1), (0, 2), (0, 3), (5, 2), (5, 3), (5, 4)],
        )
        .unwrap();
        assert!((jaccard_similarity(&g, 0, 5).unwrap() - 0.5).abs() < 1e-12);

        // Identical neighborhoods (the two endpoints of a 4-cycle diagonal).
        let c4: G = cycle_graph(4);
        assert_eq!(jaccard_similarity(&c4, 0, 2).unwrap(), 1.0);

        // Disjoint neighborhoods.
        let path: G = G::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(jaccard_similarity(&path, 0, 2).unwrap(), 0.0);

        assert!(matches!(
            jaccard_similarity(&c4, 1, 1),
            Err(MetricsError::SameNode(1))
        ));
        assert!(jaccard_similarity(&c4, 0, 9).is_err());
    }

    #[test]
    fn similarity_excludes_the_endpoints_themselves() {
        // In K4 every pair shares exactly the two other nodes.
        let k4: G = complete_graph(4);
        assert_eq!(jaccard_similarity(&k4, 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn defense_drop_counts() {
        let g: G = cycle_graph(10); // 10 edges
        assert_eq!(jaccard_defense(&g, 0.0).edges(), g.edges());
        let pruned = jaccard_defense(&g, 0.10);
        assert_eq!(pruned.num_edges(), 9);
        let pruned = jaccard_defense(&g, 0.25);
        assert_eq!(pruned.num_edges(), 8);
    }

    #[test]
    fn defense_output_is_a_subgraph_with_same_nodes() {
        for seed in 0..30 {
            let g: G = erdos_renyi_graph(12, 0.35, seed).unwrap();
            let pruned = jaccard_defense(&g, 0.2);
            assert_eq!(pruned.num_nodes(), g.num_nodes());
            assert_eq!(pruned.features(), g.features());
            for &(u, v) in pruned.edges() {
                assert!(g.has_edge(u, v));
            }
            let again = jaccard_defense(&g, 0.2);
            assert_eq!(pruned.edges(), again.edges());
        }
    }

    #[test]
    fn defense_prunes_pendant_edges_before_clustered_ones() {
        // A triangle with a pendant leaf: the leaf edge has similarity 0,
        // every triangle edge has positive similarity.
        let g: G = G::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let pruned = jaccard_defense(&g, 0.25); // drops exactly one edge
        assert_eq!(pruned.num_edges(), 3);
        assert!(!pruned.has_edge(2, 3));
    }

    #[test]
    fn zero_bad_when_model_compared_with_itself() {
        let model = GnnModel::<f64>::new(crate::nn::GnnArch::Gcn, 5, 4, 1, 2, 3);
        let test: Vec<(G, usize)> = (0..6)
            .map(|i| {
                let g = crate::graph::degree_one_hot(&star_graph::<f64>(3 + i % 2), 4);
                (g, i % 2)
            })
            .collect();
        let trigger: Trigger<f64> =
            Trigger::from_motif(crate::census::MotifId::M32, 6).unwrap();
        let placer = Placer::Random { seed: 0 };
        let row = evaluate_attack(&model, &model, &test, &trigger, &placer, 1).unwrap();
        assert_eq!(row.bad, 0.0);
    }
}
