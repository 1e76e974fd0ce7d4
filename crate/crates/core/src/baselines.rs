//! Comparison attacks sharing the poisoning and retraining machinery: a
//! universal random-subgraph trigger placed at random, highest-centrality
//! placement of the census-selected trigger, and random placement of the
//! census-selected trigger.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{
    candidate_nodes, erdos_renyi_trigger, run_attack, AttackError, AttackOutcome, BackdoorConfig,
    InjectionPlan, PlacementSpec, Trigger, TriggerSpec,
};
use crate::graph::{Dataset, Graph, Split};
use crate::nn::{GnnArch, TrainConfig};
use crate::scalar::Scalar;

/// Default edge probability for the universal random trigger.
pub const DEFAULT_TRIGGER_DENSITY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Universal connected random trigger, random placement.
    ErB,
    /// Census-selected trigger placed on the highest-centrality nodes.
    MaxDcc,
    /// Census-selected trigger, random placement.
    MotifR,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ErB => "er-b",
            BaselineKind::MaxDcc => "maxdcc",
            BaselineKind::MotifR => "motif-r",
        }
    }

    /// Trigger source and placement policy this baseline runs with.
    pub fn specs(self) -> (TriggerSpec, PlacementSpec) {
        match self {
            BaselineKind::ErB => (
                TriggerSpec::ErdosRenyi {
                    density: DEFAULT_TRIGGER_DENSITY,
                },
                PlacementSpec::Random,
            ),
            BaselineKind::MaxDcc => (TriggerSpec::FromCensus, PlacementSpec::DegreeTop),
            BaselineKind::MotifR => (TriggerSpec::FromCensus, PlacementSpec::Random),
        }
    }
}

/// One seeded Erdos-Renyi draw, redrawn until connected, fixed for the whole
/// experiment as the universal trigger.
pub fn er_b_trigger<S: Scalar>(
    n: usize,
    density: f64,
    seed: u64,
) -> Result<Trigger<S>, AttackError> {
    erdos_renyi_trigger(n, density, n * (n - 1) / 2, seed)
}

/// Uniform seeded sample of distinct injection positions.
pub fn place_random<S: Scalar>(
    graph: &Graph<S>,
    trigger: &Trigger<S>,
    seed: u64,
) -> Result<InjectionPlan, AttackError> {
    let t = trigger.num_nodes();
    if graph.num_nodes() < t {
        return Err(AttackError::GraphTooSmall {
            nodes: graph.num_nodes(),
            needed: t,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..graph.num_nodes()).collect();
    let mut node_ids = Vec::with_capacity(t);
    for _ in 0..t {
        let i = rng.gen_range(0..pool.len());
        node_ids.push(pool.swap_remove(i));
    }
    Ok(InjectionPlan { node_ids })
}

/// Top trigger-size nodes by degree centrality, descending, ties by id.
pub fn place_maxdcc<S: Scalar>(
    graph: &Graph<S>,
    trigger: &Trigger<S>,
) -> Result<InjectionPlan, AttackError> {
    let t = trigger.num_nodes();
    if graph.num_nodes() < t {
        return Err(AttackError::GraphTooSmall {
            nodes: graph.num_nodes(),
            needed: t,
        });
    }
    Ok(InjectionPlan {
        node_ids: candidate_nodes(graph, t),
    })
}

/// Runs a baseline through the shared pipeline; only the trigger source and
/// placement policy differ from the shadow-guided attack.
pub fn run_baseline<S: Scalar>(
    kind: BaselineKind,
    dataset: &Dataset<S>,
    split: &Split,
    victim_arch: GnnArch,
    config: &BackdoorConfig,
    train_config: &TrainConfig,
) -> Result<AttackOutcome<S>, AttackError> {
    let (trigger_spec, placement) = kind.specs();
    run_attack(
        dataset,
        split,
        victim_arch,
        trigger_spec,
        placement,
        config,
        train_config,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::MotifId;
    use crate::graph::{erdos_renyi_graph, path_graph, star_graph};

    type G = Graph<f64>;

    #[test]
    fn er_trigger_is_universal_per_seed() {
        let a: Trigger<f64> = er_b_trigger(4, 0.8, 3).unwrap();
        let b: Trigger<f64> = er_b_trigger(4, 0.8, 3).unwrap();
        assert_eq!(a.topology.edges(), b.topology.edges());
        let full: Trigger<f64> = er_b_trigger(4, 1.0, 0).unwrap();
        assert_eq!(full.topology.num_edges(), 6);
        assert!(er_b_trigger::<f64>(4, 0.0, 0).is_err());
    }

    #[test]
    fn random_placement_covers_whole_graph_when_sizes_match() {
        let g: G = erdos_renyi_graph(4, 0.5, 2).unwrap();
        let trigger: Trigger<f64> = Trigger::from_motif(MotifId::M46, 6).unwrap();
        let plan = place_random(&g, &trigger, 7).unwrap();
        let mut ids = plan.node_ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert_eq!(place_random(&g, &trigger, 7).unwrap(), plan);
    }

    #[test]
    fn random_placement_is_uniform_over_nodes() {
        // Each of 10 nodes should land in a 4-node plan with probability
        // 4/10; the SE over 10k draws is ~0.005 per node.
        let g: G = erdos_renyi_graph(10, 0.4, 0).unwrap();
        let trigger: Trigger<f64> = Trigger::from_motif(MotifId::M42, 6).unwrap();
        let mut hits = [0u32; 10];
        for seed in 0..10_000 {
            for id in place_random(&g, &trigger, seed).unwrap().node_ids {
                hits[id] += 1;
            }
        }
        for (node, &h) in hits.iter().enumerate() {
            let freq = h as f64 / 10_000.0;
            assert!((freq - 0.4).abs() < 0.02, "node {node}: {freq}");
        }
    }

    #[test]
    fn random_placement_rejects_small_graphs() {
        let g: G = path_graph(2);
        let trigger: Trigger<f64> = Trigger::from_motif(MotifId::M32, 6).unwrap();
        assert!(matches!(
            place_random(&g, &trigger, 0),
            Err(AttackError::GraphTooSmall { nodes: 2, needed: 3 })
        ));
    }

    #[test]
    fn maxdcc_placement_examples() {
        let trigger3: Trigger<f64> = Trigger::from_motif(MotifId::M32, 6).unwrap();

        // Star: center first, then the two lowest-id leaves.
        let star: G = star_graph(4);
        let plan = place_maxdcc(&star, &trigger3).unwrap();
        assert_eq!(plan.node_ids, vec![0, 1, 2]);

        // Path 0-1-2-3: degrees (1, 2, 2, 1).
        let path: G = path_graph(4);
        let plan = place_maxdcc(&path, &trigger3).unwrap();
        assert_eq!(plan.node_ids, vec![1, 2, 0]);
    }

    #[test]
    fn maxdcc_placement_is_deterministic_and_valid() {
        let trigger: Trigger<f64> = Trigger::from_motif(MotifId::M42, 6).unwrap();
        for seed in 0..20 {
            let g: G = erdos_renyi_graph(9, 0.4, seed).unwrap();
            let a = place_maxdcc(&g, &trigger).unwrap();
            let b = place_maxdcc(&g, &trigger).unwrap();
            assert_eq!(a, b);
            let mut ids = a.node_ids.clone();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 4);
            assert!(ids.iter().all(|&i| i < 9));
        }
    }
}
