//! The backdoor attack proper: trigger selection from motif statistics,
//! injection-position optimization via degree centrality and shadow-model
//! feedback, trigger mixing, dataset poisoning, and victim retraining.
//!
//! The attacker is black-box: the only thing that crosses the
//! attacker/victim boundary is [`TargetOracle::query`], and the oracle
//! counts every call so the access budget is auditable.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::census::{dataset_distribution, motif_graph, CensusError, MotifDistribution, MotifId};
use crate::graph::{AvailableData, Dataset, Graph, GraphError, Split};
use crate::matrix::Matrix;
use crate::nn::{
    forward, train, GnnArch, GnnModel, LossKind, NnError, Prediction, TrainConfig, TrainTarget,
    DEFAULT_HIDDEN_DIM, DEFAULT_NUM_LAYERS,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no motif satisfies the trigger edge bound {0}")]
    NoEligibleTrigger(usize),
    #[error("trigger has {edges} edges, over the bound {bound}")]
    TriggerOverEdgeBound { edges: usize, bound: usize },
    #[error("degree centrality needs at least 2 nodes")]
    SingleNodeGraph,
    #[error("graph has {nodes} nodes, trigger needs {needed}")]
    GraphTooSmall { nodes: usize, needed: usize },
    #[error("{have} candidates for a {need}-node trigger")]
    NotEnoughCandidates { have: usize, need: usize },
    #[error("plan has {plan} nodes, trigger has {trigger}")]
    PlanSizeMismatch { plan: usize, trigger: usize },
    #[error("poison budget floor({rate} * {train_len}) is zero")]
    PoisonBudgetZero { rate: f64, train_len: usize },
    #[error("only {eligible} poisonable graphs, need {needed}")]
    NotEnoughPoisonable { eligible: usize, needed: usize },
    #[error("filter count k = {k} is below the trigger node count {trigger_nodes}")]
    FilterTooSmall { k: usize, trigger_nodes: usize },
    #[error("target-model query on available graph {index} failed: {source}")]
    QueryFailed { index: usize, source: NnError },
    #[error("connected random trigger draw failed after {0} attempts")]
    TriggerDrawExhausted(usize),
    #[error("{stage}: {source}")]
    Training {
        stage: &'static str,
        #[source]
        source: NnError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Census(#[from] CensusError),
}

/// Pipeline stages that need their own random stream. Each gets a
/// deterministic seed derived from the run seed via [`stage_seed`].
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    SplitData,
    BenignInit,
    BenignTrain,
    TriggerDraw,
    ShadowInit,
    ShadowTrain,
    PoisonSample,
    Placement,
    VictimTrain,
    EvalPlacement,
}

/// Splitmix64 of `run_seed + (stage + 1) * golden`; documented so reruns
/// agree on every stream.
pub fn stage_seed(run_seed: u64, stage: Stage) -> u64 {
    let mut z = run_seed.wrapping_add((stage as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriggerSource {
    Motif(MotifId),
    Custom,
}

impl std::fmt::Display for TriggerSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TriggerSource::Motif(m) => f.write_str(m.name()),
            TriggerSource::Custom => f.write_str("custom"),
        }
    }
}

/// A trigger subgraph plus where it came from. Topology nodes are ordered by
/// descending degree so that plan position 0 (the highest-scoring victim
/// node) always hosts the trigger's most connected node.
#[derive(Debug, Clone)]
pub struct Trigger<S> {
    pub topology: Graph<S>,
    pub source: TriggerSource,
    pub max_edges: usize,
}

impl<S: Scalar> Trigger<S> {
    pub fn from_motif(id: MotifId, max_edges: usize) -> Result<Self, AttackError> {
        if id.num_edges() > max_edges {
            return Err(AttackError::TriggerOverEdgeBound {
                edges: id.num_edges(),
                bound: max_edges,
            });
        }
        Ok(Self {
            topology: order_by_degree(&motif_graph(id)),
            source: TriggerSource::Motif(id),
            max_edges,
        })
    }

    pub fn custom(topology: Graph<S>, max_edges: usize) -> Result<Self, AttackError> {
        assert!(topology.num_nodes() <= 4, "trigger is capped at 4 nodes");
        if topology.num_edges() > max_edges {
            return Err(AttackError::TriggerOverEdgeBound {
                edges: topology.num_edges(),
                bound: max_edges,
            });
        }
        Ok(Self {
            topology: order_by_degree(&topology),
            source: TriggerSource::Custom,
            max_edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }
}

fn order_by_degree<S: Scalar>(graph: &Graph<S>) -> Graph<S> {
    let mut order: Vec<usize> = (0..graph.num_nodes()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(graph.degree(i)), i));
    graph.induced_subgraph(&order).expect("permutation is valid")
}

/// Connected random trigger: one seeded draw per experiment, redrawn until
/// it is connected and within the edge bound.
pub(crate) fn erdos_renyi_trigger<S: Scalar>(
    n: usize,
    density: f64,
    max_edges: usize,
    seed: u64,
) -> Result<Trigger<S>, AttackError> {
    assert!((2..=4).contains(&n), "trigger is capped at 4 nodes");
    if density <= 0.0 {
        // Density 0 can never produce a connected draw.
        return Err(AttackError::TriggerDrawExhausted(0));
    }
    const MAX_ATTEMPTS: usize = 10_000;
    for attempt in 0..MAX_ATTEMPTS {
        let g: Graph<S> =
            crate::graph::erdos_renyi_graph(n, density, seed.wrapping_add(attempt as u64))?;
        if g.num_edges() <= max_edges && is_connected(&g) {
            return Ok(Trigger {
                topology: order_by_degree(&g),
                source: TriggerSource::Custom,
                max_edges,
            });
        }
    }
    Err(AttackError::TriggerDrawExhausted(MAX_ATTEMPTS))
}

fn is_connected<S: Scalar>(graph: &Graph<S>) -> bool {
    let n = graph.num_nodes();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0usize];
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

/// Attack hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackdoorConfig {
    pub target_label: usize,
    /// Fraction of the training set replaced by poisoned graphs.
    pub poison_rate: f64,
    /// Candidate nodes kept by the centrality filter per graph.
    pub filter_count: usize,
    pub trigger_max_edges: usize,
    /// Fraction of the training set visible to the attacker.
    pub available_fraction: f64,
    pub seed: u64,
}

impl Default for BackdoorConfig {
    fn default() -> Self {
        Self {
            target_label: 1,
            poison_rate: 0.1,
            filter_count: 10,
            trigger_max_edges: 6,
            available_fraction: 1.0,
            seed: 0,
        }
    }
}

/// Ordered victim-graph node ids where the trigger is wired in; position `i`
/// hosts trigger node `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub node_ids: Vec<usize>,
}

/// Picks the trigger by the three selection rules in strictly decreasing
/// priority: prefer motifs absent from the dataset, then larger
/// target-minus-other average count, then more edges; final ties go to the
/// lower motif id. Motifs over the edge bound are never considered.
pub fn select_trigger<S: Scalar>(
    dist: &MotifDistribution,
    max_edges: usize,
) -> Result<Trigger<S>, AttackError> {
    let key = |m: MotifId| {
        (
            !dist.is_absent(m),
            -(dist.tar_avg(m) - dist.oth_avg(m)),
            std::cmp::Reverse(m.num_edges()),
        )
    };
    let best = MotifId::ALL
        .iter()
        .copied()
        .filter(|m| m.num_edges() <= max_edges)
        .min_by(|&a, &b| {
            key(a)
                .partial_cmp(&key(b))
                .expect("averages are finite")
                .then(a.cmp(&b))
        })
        .ok_or(AttackError::NoEligibleTrigger(max_edges))?;
    Trigger::from_motif(best, max_edges)
}

/// Degree centrality `deg(i) / (N - 1)`.
pub fn degree_centrality<S: Scalar>(graph: &Graph<S>) -> Result<Vec<S>, AttackError> {
    let n = graph.num_nodes();
    if n < 2 {
        return Err(AttackError::SingleNodeGraph);
    }
    let denom = S::from_config((n - 1) as f64);
    Ok((0..n)
        .map(|i| S::from_config(graph.degree(i) as f64) / denom)
        .collect())
}

/// Top-`k` nodes by degree centrality, descending, ties broken by ascending
/// node id. Returns all nodes when `k >= N`.
pub fn candidate_nodes<S: Scalar>(graph: &Graph<S>, k: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..graph.num_nodes()).collect();
    nodes.sort_by_key(|&i| (std::cmp::Reverse(graph.degree(i)), i));
    nodes.truncate(k);
    nodes
}

/// The attacker's only view of the target model: a prediction service with
/// a query counter. Model parameters stay private behind this wrapper.
pub struct TargetOracle<'a, S> {
    model: &'a GnnModel<S>,
    queries: Cell<u64>,
}

impl<'a, S: Scalar> TargetOracle<'a, S> {
    pub fn new(model: &'a GnnModel<S>) -> Self {
        Self {
            model,
            queries: Cell::new(0),
        }
    }

    pub fn query(&self, graph: &Graph<S>) -> Result<Prediction<S>, NnError> {
        self.queries.set(self.queries.get() + 1);
        forward(self.model, graph)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.get()
    }
}

/// Surrogate classifier distilled from target-model confidences.
#[derive(Debug, Clone)]
pub struct ShadowModel<S> {
    model: GnnModel<S>,
}

impl<S: Scalar> ShadowModel<S> {
    /// Wraps an already-trained model as the surrogate (tests and custom
    /// setups; the pipeline itself goes through [`build_shadow`]).
    pub fn from_model(model: GnnModel<S>) -> Self {
        Self { model }
    }

    pub fn predict(&self, graph: &Graph<S>) -> Result<Prediction<S>, NnError> {
        forward(&self.model, graph)
    }

    pub fn model(&self) -> &GnnModel<S> {
        &self.model
    }
}

/// Queries the target once per available graph, stores the confidence
/// vectors as soft labels, and distills a fresh convolutional model on them.
pub fn build_shadow<S: Scalar>(
    oracle: &TargetOracle<'_, S>,
    available: &mut AvailableData<S>,
    config: &TrainConfig,
) -> Result<ShadowModel<S>, AttackError> {
    assert!(!available.graphs.is_empty(), "available data is empty");
    let mut pairs = Vec::with_capacity(available.graphs.len());
    let mut soft_rows = Vec::with_capacity(available.graphs.len());
    for (index, g) in available.graphs.iter().enumerate() {
        let pred = oracle
            .query(g)
            .map_err(|source| AttackError::QueryFailed { index, source })?;
        soft_rows.push(pred.probs.clone());
        pairs.push((g.clone(), TrainTarget::Soft(pred.probs)));
    }
    let num_classes = soft_rows[0].len();
    available.soft_labels = Some(Matrix::from_rows(soft_rows));

    let model = GnnModel::new(
        GnnArch::Gcn,
        available.graphs[0].feature_dim(),
        DEFAULT_HIDDEN_DIM,
        DEFAULT_NUM_LAYERS,
        num_classes,
        stage_seed(config.seed, Stage::ShadowInit),
    );
    let config = TrainConfig {
        loss: LossKind::SoftCrossEntropy,
        ..config.clone()
    };
    let outcome = train(model, &pairs, &config, None).map_err(|source| AttackError::Training {
        stage: "shadow training",
        source,
    })?;
    Ok(ShadowModel {
        model: outcome.model,
    })
}

/// Node-importance score from model feedback: the L1 distance between the
/// shadow's class probabilities with and without node `r`.
pub fn subscore<S: Scalar>(
    shadow: &ShadowModel<S>,
    graph: &Graph<S>,
    r: usize,
) -> Result<S, AttackError> {
    if graph.num_nodes() < 2 {
        return Err(AttackError::SingleNodeGraph);
    }
    let stagged = |source| AttackError::Training {
        stage: "subscore",
        source,
    };
    let base = shadow.predict(graph).map_err(stagged)?;
    let dropped = graph.drop_node(r)?;
    let pred = shadow.predict(&dropped).map_err(stagged)?;
    Ok(l1_distance(&base.probs, &pred.probs))
}

pub(crate) fn l1_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(S::zero(), |acc, d| acc + d)
}

/// Ranks the candidates by subscore (descending, ties keep candidate order)
/// and takes the top `t` as the injection plan.
pub fn select_injection_nodes<S: Scalar>(
    shadow: &ShadowModel<S>,
    graph: &Graph<S>,
    candidates: &[usize],
    trigger_nodes: usize,
) -> Result<InjectionPlan, AttackError> {
    if graph.num_nodes() < trigger_nodes {
        return Err(AttackError::GraphTooSmall {
            nodes: graph.num_nodes(),
            needed: trigger_nodes,
        });
    }
    if candidates.len() < trigger_nodes {
        return Err(AttackError::NotEnoughCandidates {
            have: candidates.len(),
            need: trigger_nodes,
        });
    }
    let mut scored: Vec<(usize, S)> = Vec::with_capacity(candidates.len());
    for &c in candidates {
        scored.push((c, subscore(shadow, graph, c)?));
    }
    // Stable sort keeps candidate order among equal scores.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("subscores are finite"));
    Ok(InjectionPlan {
        node_ids: scored
            .into_iter()
            .take(trigger_nodes)
            .map(|(c, _)| c)
            .collect(),
    })
}

/// Mixes the trigger into the graph: edges among the plan nodes are replaced
/// by the trigger's edges under the positional mapping `plan[i] <-> trigger
/// node i`. Edges to the rest of the graph, node features, and the node
/// count are untouched.
pub fn inject_trigger<S: Scalar>(
    graph: &Graph<S>,
    trigger: &Trigger<S>,
    plan: &InjectionPlan,
) -> Result<Graph<S>, AttackError> {
    if plan.node_ids.len() != trigger.num_nodes() {
        return Err(AttackError::PlanSizeMismatch {
            plan: plan.node_ids.len(),
            trigger: trigger.num_nodes(),
        });
    }
    let mut in_plan = vec![false; graph.num_nodes()];
    for &id in &plan.node_ids {
        if id >= graph.num_nodes() {
            return Err(GraphError::NodeOutOfRange(id, graph.num_nodes()).into());
        }
        if in_plan[id] {
            return Err(GraphError::DuplicateNode(id).into());
        }
        in_plan[id] = true;
    }
    let kept = graph
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| !(in_plan[u] && in_plan[v]));
    let added = trigger
        .topology
        .edges()
        .iter()
        .map(|&(a, b)| (plan.node_ids[a], plan.node_ids[b]));
    let edges: Vec<(usize, usize)> = kept.chain(added).collect();
    Ok(Graph::new(
        graph.num_nodes(),
        edges,
        graph.features().clone(),
        graph.label(),
    )?)
}

/// How injection positions are chosen, both when poisoning the training set
/// and when patching test graphs at evaluation time.
pub enum Placer<'a, S> {
    /// Seeded uniform sample of distinct nodes; the per-graph ordinal salts
    /// the stream so placements are independent yet reproducible.
    Random { seed: u64 },
    /// Top nodes by degree centrality.
    DegreeTop,
    /// Centrality filter then shadow-model subscores.
    ShadowGuided {
        shadow: &'a ShadowModel<S>,
        filter_count: usize,
    },
}

impl<'a, S: Scalar> Placer<'a, S> {
    pub fn place(
        &self,
        graph: &Graph<S>,
        trigger_nodes: usize,
        ordinal: u64,
    ) -> Result<InjectionPlan, AttackError> {
        if graph.num_nodes() < trigger_nodes {
            return Err(AttackError::GraphTooSmall {
                nodes: graph.num_nodes(),
                needed: trigger_nodes,
            });
        }
        match self {
            Placer::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(
                    seed.wrapping_add(ordinal),
                    Stage::Placement,
                ));
                let mut pool: Vec<usize> = (0..graph.num_nodes()).collect();
                let mut node_ids = Vec::with_capacity(trigger_nodes);
                for _ in 0..trigger_nodes {
                    let i = rng.gen_range(0..pool.len());
                    node_ids.push(pool.swap_remove(i));
                }
                Ok(InjectionPlan { node_ids })
            }
            Placer::DegreeTop => Ok(InjectionPlan {
                node_ids: candidate_nodes(graph, trigger_nodes),
            }),
            Placer::ShadowGuided {
                shadow,
                filter_count,
            } => {
                if *filter_count < trigger_nodes {
                    return Err(AttackError::FilterTooSmall {
                        k: *filter_count,
                        trigger_nodes,
                    });
                }
                let candidates = candidate_nodes(graph, *filter_count);
                select_injection_nodes(shadow, graph, &candidates, trigger_nodes)
            }
        }
    }
}

/// One poisoned training graph, for the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoisonRecord {
    pub original_index: usize,
    pub plan: Vec<usize>,
    pub trigger_motif: String,
    pub pre_edges: Vec<(usize, usize)>,
    pub post_edges: Vec<(usize, usize)>,
}

/// Record of what the poisoning phase did to the training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoisonManifest {
    pub target_label: usize,
    pub poison_count: usize,
    pub trigger_motif: String,
    pub trigger_edges: Vec<(usize, usize)>,
    pub records: Vec<PoisonRecord>,
}

/// Replaces `floor(p * |train|)` seeded-sampled non-target graphs with their
/// trigger-injected versions relabeled to the target, leaving the rest
/// untouched. Returns the poisoned set plus the manifest.
pub fn poison_dataset<S: Scalar>(
    train: &[(Graph<S>, usize)],
    trigger: &Trigger<S>,
    config: &BackdoorConfig,
    placer: &Placer<'_, S>,
) -> Result<(Vec<(Graph<S>, usize)>, PoisonManifest), AttackError> {
    let needed = (config.poison_rate * train.len() as f64).floor() as usize;
    if needed == 0 {
        return Err(AttackError::PoisonBudgetZero {
            rate: config.poison_rate,
            train_len: train.len(),
        });
    }
    let t = trigger.num_nodes();
    let mut eligible: Vec<usize> = train
        .iter()
        .enumerate()
        .filter(|(_, (g, y))| *y != config.target_label && g.num_nodes() >= t)
        .map(|(i, _)| i)
        .collect();
    if eligible.len() < needed {
        return Err(AttackError::NotEnoughPoisonable {
            eligible: eligible.len(),
            needed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(config.seed, Stage::PoisonSample));
    for i in (1..eligible.len()).rev() {
        let j = rng.gen_range(0..=i);
        eligible.swap(i, j);
    }
    eligible.truncate(needed);
    eligible.sort_unstable();

    let mut poisoned: Vec<(Graph<S>, usize)> = train.to_vec();
    let mut records = Vec::with_capacity(needed);
    for &idx in &eligible {
        let (graph, _) = &train[idx];
        let plan = placer.place(graph, t, idx as u64)?;
        let injected = inject_trigger(graph, trigger, &plan)?;
        records.push(PoisonRecord {
            original_index: idx,
            plan: plan.node_ids.clone(),
            trigger_motif: trigger.source.to_string(),
            pre_edges: graph.edges().to_vec(),
            post_edges: injected.edges().to_vec(),
        });
        poisoned[idx] = (
            injected.with_label(config.target_label),
            config.target_label,
        );
    }
    Ok((
        poisoned,
        PoisonManifest {
            target_label: config.target_label,
            poison_count: needed,
            trigger_motif: trigger.source.to_string(),
            trigger_edges: trigger.topology.edges().to_vec(),
            records,
        },
    ))
}

/// Trigger provenance for a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerSpec {
    /// Motif census of the attacker-visible data plus the selection rules.
    FromCensus,
    /// A fixed motif (used by the series grid and the per-motif scan).
    FixedMotif(MotifId),
    /// Universal random draw, redrawn until connected.
    ErdosRenyi { density: f64 },
}

/// Placement policy for a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementSpec {
    ShadowGuided,
    DegreeTop,
    Random,
}

/// Everything a finished attack run exposes for evaluation.
pub struct AttackOutcome<S> {
    pub benign: GnnModel<S>,
    pub backdoored: GnnModel<S>,
    pub shadow: Option<ShadowModel<S>>,
    pub trigger: Trigger<S>,
    pub manifest: PoisonManifest,
    /// Queries the attacker made against the target model.
    pub target_queries: u64,
    /// Number of graphs the attacker could see.
    pub available_size: usize,
}

impl<S: Scalar> AttackOutcome<S> {
    /// Placement policy for patching inference-time inputs, mirroring how
    /// the training set was poisoned.
    pub fn eval_placer(&self, placement: PlacementSpec, config: &BackdoorConfig) -> Placer<'_, S> {
        match placement {
            PlacementSpec::Random => Placer::Random {
                seed: stage_seed(config.seed, Stage::EvalPlacement),
            },
            PlacementSpec::DegreeTop => Placer::DegreeTop,
            PlacementSpec::ShadowGuided => Placer::ShadowGuided {
                shadow: self
                    .shadow
                    .as_ref()
                    .expect("shadow-guided run has a shadow"),
                filter_count: config.filter_count,
            },
        }
    }
}

/// Labeled view of a split part.
pub fn subset<S: Scalar>(dataset: &Dataset<S>, indices: &[usize]) -> Vec<(Graph<S>, usize)> {
    indices
        .iter()
        .map(|&i| {
            let g = dataset.graphs[i].clone();
            let y = g.label().expect("dataset graphs are labeled");
            (g, y)
        })
        .collect()
}

/// Full pipeline: benign training, attacker census on the visible data,
/// trigger choice, optional shadow distillation (the only stage that touches
/// the oracle), poisoning, and victim retraining warm-started from the
/// benign parameters.
#[allow(clippy::too_many_arguments)]
pub fn run_attack<S: Scalar>(
    dataset: &Dataset<S>,
    split: &Split,
    victim_arch: GnnArch,
    trigger_spec: TriggerSpec,
    placement: PlacementSpec,
    config: &BackdoorConfig,
    train_config: &TrainConfig,
    pretrained_benign: Option<GnnModel<S>>,
) -> Result<AttackOutcome<S>, AttackError> {
    let train_set = subset(dataset, &split.train_idx);
    let val_set = subset(dataset, &split.val_idx);

    let benign = match pretrained_benign {
        Some(model) => model,
        None => {
            let model = GnnModel::new(
                victim_arch,
                dataset.feature_dim,
                DEFAULT_HIDDEN_DIM,
                DEFAULT_NUM_LAYERS,
                dataset.num_classes,
                stage_seed(config.seed, Stage::BenignInit),
            );
            let data: Vec<(Graph<S>, TrainTarget<S>)> = train_set
                .iter()
                .map(|(g, y)| (g.clone(), TrainTarget::Hard(*y)))
                .collect();
            let tc = TrainConfig {
                seed: stage_seed(config.seed, Stage::BenignTrain),
                ..train_config.clone()
            };
            train(model, &data, &tc, Some(&val_set))
                .map_err(|source| AttackError::Training {
                    stage: "benign training",
                    source,
                })?
                .model
        }
    };

    // Attacker-visible slice of the training data.
    let mut visible_idx: Vec<usize> = (0..train_set.len()).collect();
    if config.available_fraction < 1.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(config.seed, Stage::SplitData));
        for i in (1..visible_idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            visible_idx.swap(i, j);
        }
        let keep = ((config.available_fraction * train_set.len() as f64).ceil() as usize)
            .clamp(1, train_set.len());
        visible_idx.truncate(keep);
        visible_idx.sort_unstable();
    }
    let available_graphs: Vec<Graph<S>> = visible_idx
        .iter()
        .map(|&i| train_set[i].0.clone())
        .collect();

    let trigger: Trigger<S> = match trigger_spec {
        TriggerSpec::FromCensus => {
            let ava_dataset =
                Dataset::new("available", available_graphs.clone(), dataset.num_classes)?;
            let dist = dataset_distribution(&ava_dataset, config.target_label)?;
            select_trigger(&dist, config.trigger_max_edges)?
        }
        TriggerSpec::FixedMotif(id) => Trigger::from_motif(id, config.trigger_max_edges)?,
        TriggerSpec::ErdosRenyi { density } => erdos_renyi_trigger(
            4,
            density,
            config.trigger_max_edges,
            stage_seed(config.seed, Stage::TriggerDraw),
        )?,
    };

    let oracle = TargetOracle::new(&benign);
    let mut available = AvailableData::new(available_graphs);
    let shadow = if placement == PlacementSpec::ShadowGuided {
        let tc = TrainConfig {
            seed: stage_seed(config.seed, Stage::ShadowTrain),
            ..train_config.clone()
        };
        Some(build_shadow(&oracle, &mut available, &tc)?)
    } else {
        None
    };

    let placer = match placement {
        PlacementSpec::ShadowGuided => Placer::ShadowGuided {
            shadow: shadow.as_ref().expect("just built"),
            filter_count: config.filter_count,
        },
        PlacementSpec::DegreeTop => Placer::DegreeTop,
        PlacementSpec::Random => Placer::Random {
            seed: stage_seed(config.seed, Stage::Placement),
        },
    };
    let (poisoned, manifest) = poison_dataset(&train_set, &trigger, config, &placer)?;

    let data: Vec<(Graph<S>, TrainTarget<S>)> = poisoned
        .iter()
        .map(|(g, y)| (g.clone(), TrainTarget::Hard(*y)))
        .collect();
    let tc = TrainConfig {
        seed: stage_seed(config.seed, Stage::VictimTrain),
        ..train_config.clone()
    };
    // Retraining takes the final parameters: checkpointing on clean
    // validation accuracy would keep the warm-start weights and discard
    // the backdoor.
    let backdoored = train(benign.clone(), &data, &tc, None)
        .map_err(|source| AttackError::Training {
            stage: "victim retraining",
            source,
        })?
        .model;

    let target_queries = oracle.query_count();
    drop(oracle);
    Ok(AttackOutcome {
        benign,
        backdoored,
        shadow,
        trigger,
        manifest,
        target_queries,
        available_size: visible_idx.len(),
    })
}
