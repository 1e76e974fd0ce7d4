//! Experiment orchestration: seeded repetitions, the per-motif attack scan,
//! the train-vs-infer trigger grid, sensitivity sweeps, and the defense
//! comparison. Independent runs fan out to the rayon pool; results are
//! collected in run order so reports do not depend on worker count.

pub mod corpus;
pub mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    run_attack, stage_seed, AttackError, AttackOutcome, BackdoorConfig, PlacementSpec, Stage,
    Trigger, TriggerSpec,
};
use crate::baselines::BaselineKind;
use crate::census::{dataset_distribution, MotifId};
use crate::graph::{split_dataset, Dataset, Split};
use crate::metrics::{attack_outcomes, evaluate_attack, evaluate_attack_pruned, MetricsError};
use crate::nn::{GnnArch, GnnModel, TrainConfig};
use crate::scalar::Scalar;

pub use corpus::{smoke_corpus, trees_corpus, SMOKE_GRAPHS};
pub use report::{
    AggregateRow, ExperimentReport, ReportError, RunFailure, RunRow, ScanRow, SeriesGrid, SweepRow,
};

/// Which attack an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackKind {
    MotifBackdoor,
    ErB,
    MaxDcc,
    MotifR,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::MotifBackdoor => "motif-backdoor",
            AttackKind::ErB => "er-b",
            AttackKind::MaxDcc => "maxdcc",
            AttackKind::MotifR => "motif-r",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "motif-backdoor" => Some(AttackKind::MotifBackdoor),
            "er-b" => Some(AttackKind::ErB),
            "maxdcc" => Some(AttackKind::MaxDcc),
            "motif-r" => Some(AttackKind::MotifR),
            _ => None,
        }
    }

    pub fn specs(self) -> (TriggerSpec, PlacementSpec) {
        match self {
            AttackKind::MotifBackdoor => (TriggerSpec::FromCensus, PlacementSpec::ShadowGuided),
            AttackKind::ErB => BaselineKind::ErB.specs(),
            AttackKind::MaxDcc => BaselineKind::MaxDcc.specs(),
            AttackKind::MotifR => BaselineKind::MotifR.specs(),
        }
    }
}

/// Everything one experiment needs besides the dataset itself. The backdoor
/// seed is the base seed; run `i` derives its streams from `seed + i`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub victim_arch: GnnArch,
    pub attack: AttackKind,
    pub backdoor: BackdoorConfig,
    pub train: TrainConfig,
    pub repetitions: usize,
    pub split_ratios: (f64, f64, f64),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            victim_arch: GnnArch::Gcn,
            attack: AttackKind::MotifBackdoor,
            backdoor: BackdoorConfig::default(),
            train: TrainConfig::default(),
            repetitions: 5,
            split_ratios: (0.75, 0.05, 0.20),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// A finished run: the report row plus the artifacts it produced.
pub struct RunArtifacts<S> {
    pub row: RunRow,
    pub outcome: AttackOutcome<S>,
    pub split: Split,
}

fn single_run<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    run_index: usize,
) -> Result<RunArtifacts<S>, HarnessError> {
    let started = Instant::now();
    let run_seed = config.backdoor.seed.wrapping_add(run_index as u64);
    let split = split_dataset(
        dataset,
        config.split_ratios,
        stage_seed(run_seed, Stage::SplitData),
    )?;
    let bd = BackdoorConfig {
        seed: run_seed,
        ..config.backdoor.clone()
    };
    let (trigger_spec, placement) = config.attack.specs();
    let outcome = run_attack(
        dataset,
        &split,
        config.victim_arch,
        trigger_spec,
        placement,
        &bd,
        &config.train,
        None,
    )?;
    let test = crate::attack::subset(dataset, &split.test_idx);
    let placer = outcome.eval_placer(placement, &bd);
    let metrics = evaluate_attack(
        &outcome.backdoored,
        &outcome.benign,
        &test,
        &outcome.trigger,
        &placer,
        bd.target_label,
    )?;
    drop(placer);
    let row = RunRow {
        run_id: format!("run-{run_index}"),
        seed: run_seed,
        dataset: dataset.name.clone(),
        model: config.victim_arch.name().to_string(),
        attack: config.attack.name().to_string(),
        asr: metrics.asr,
        amc: metrics.amc.map(|v| v.to_f64().unwrap()),
        bad: metrics.bad,
        benign_acc: metrics.benign_acc,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunArtifacts {
        row,
        outcome,
        split,
    })
}

/// Runs `repetitions` independent seeded repetitions of the configured
/// attack. Failures land in the report instead of aborting the other runs.
pub fn run_experiment<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
) -> ExperimentReport {
    let (report, _) = run_experiment_full(dataset, config);
    report
}

/// Like [`run_experiment`], also returning the per-run artifacts (manifests,
/// models, splits) of the successful runs.
pub fn run_experiment_full<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
) -> (ExperimentReport, Vec<RunArtifacts<S>>) {
    let results: Vec<Result<RunArtifacts<S>, RunFailure>> = (0..config.repetitions)
        .into_par_iter()
        .map(|i| {
            single_run(dataset, config, i).map_err(|e| RunFailure {
                run_id: format!("run-{i}"),
                seed: config.backdoor.seed.wrapping_add(i as u64),
                attack: config.attack.name().to_string(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = Vec::new();
    for r in results {
        match r {
            Ok(a) => {
                rows.push(a.row.clone());
                artifacts.push(a);
            }
            Err(f) => failures.push(f),
        }
    }
    (ExperimentReport::new(rows, failures), artifacts)
}

fn train_benign_for_run<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    run_seed: u64,
    split: &Split,
) -> Result<GnnModel<S>, HarnessError> {
    // Reuses the pipeline's own benign stage by running it with a poison-free
    // shortcut: training here mirrors run_attack's benign branch seed-for-seed.
    use crate::nn::{train, TrainTarget, DEFAULT_HIDDEN_DIM, DEFAULT_NUM_LAYERS};
    let train_set = crate::attack::subset(dataset, &split.train_idx);
    let val_set = crate::attack::subset(dataset, &split.val_idx);
    let model = GnnModel::new(
        config.victim_arch,
        dataset.feature_dim,
        DEFAULT_HIDDEN_DIM,
        DEFAULT_NUM_LAYERS,
        dataset.num_classes,
        stage_seed(run_seed, Stage::BenignInit),
    );
    let data: Vec<_> = train_set
        .iter()
        .map(|(g, y)| (g.clone(), TrainTarget::Hard(*y)))
        .collect();
    let tc = TrainConfig {
        seed: stage_seed(run_seed, Stage::BenignTrain),
        ..config.train.clone()
    };
    Ok(train(model, &data, &tc, Some(&val_set))
        .map_err(|source| AttackError::Training {
            stage: "benign training",
            source,
        })?
        .model)
}

/// Benign-only training run (the `train-benign` command): returns the model
/// and its clean test accuracy.
pub fn train_benign<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
) -> Result<(GnnModel<S>, f64), HarnessError> {
    let run_seed = config.backdoor.seed;
    let split = split_dataset(
        dataset,
        config.split_ratios,
        stage_seed(run_seed, Stage::SplitData),
    )?;
    let model = train_benign_for_run(dataset, config, run_seed, &split)?;
    let test = crate::attack::subset(dataset, &split.test_idx);
    let acc = crate::nn::accuracy(&model, &test).map_err(MetricsError::Nn)?;
    Ok((model, acc))
}

/// For each of the 8 motifs: a randomly placed fixed-motif attack, averaged
/// over the configured repetitions, next to the motif's distribution in the
/// dataset. Per-motif failures are recorded in the row, not propagated.
pub fn motif_scan<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
) -> Result<Vec<ScanRow>, HarnessError> {
    let dist = dataset_distribution(dataset, config.backdoor.target_label)
        .map_err(AttackError::Census)?;

    let per_rep: Vec<Vec<Result<f64, String>>> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let run_seed = config.backdoor.seed.wrapping_add(rep as u64);
            let bd = BackdoorConfig {
                seed: run_seed,
                ..config.backdoor.clone()
            };
            let prep = (|| -> Result<_, HarnessError> {
                let split = split_dataset(
                    dataset,
                    config.split_ratios,
                    stage_seed(run_seed, Stage::SplitData),
                )?;
                let benign = train_benign_for_run(dataset, config, run_seed, &split)?;
                Ok((split, benign))
            })();
            match prep {
                Err(e) => vec![Err(e.to_string()); 8],
                Ok((split, benign)) => MotifId::ALL
                    .iter()
                    .map(|&motif| {
                        scan_one_motif(dataset, config, &bd, &split, &benign, motif)
                            .map_err(|e| e.to_string())
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(MotifId::ALL
        .iter()
        .enumerate()
        .map(|(mi, &motif)| {
            let mut asrs = Vec::new();
            let mut error = None;
            for rep in &per_rep {
                match &rep[mi] {
                    Ok(asr) => asrs.push(*asr),
                    Err(e) => error = Some(e.clone()),
                }
            }
            ScanRow {
                motif,
                tar_avg: dist.tar_avg(motif),
                oth_avg: dist.oth_avg(motif),
                asr: (!asrs.is_empty()).then(|| asrs.iter().sum::<f64>() / asrs.len() as f64),
                error,
            }
        })
        .collect())
}

fn scan_one_motif<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    bd: &BackdoorConfig,
    split: &Split,
    benign: &GnnModel<S>,
    motif: MotifId,
) -> Result<f64, HarnessError> {
    let outcome = run_attack(
        dataset,
        split,
        config.victim_arch,
        TriggerSpec::FixedMotif(motif),
        PlacementSpec::Random,
        bd,
        &config.train,
        Some(benign.clone()),
    )?;
    let test = crate::attack::subset(dataset, &split.test_idx);
    let placer = outcome.eval_placer(PlacementSpec::Random, bd);
    let outcomes = attack_outcomes(
        &outcome.backdoored,
        &test,
        &outcome.trigger,
        &placer,
        bd.target_label,
        None,
    )?;
    let successes = outcomes.iter().filter(|o| o.is_some()).count();
    Ok(successes as f64 / outcomes.len() as f64)
}

/// The train-motif x infer-motif success matrix: poison and retrain with the
/// row motif (randomly placed), then measure the success rate of every
/// column motif injected at random positions into the test graphs.
pub fn series_grid<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
) -> SeriesGrid {
    let per_rep: Vec<Vec<Vec<Option<f64>>>> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let run_seed = config.backdoor.seed.wrapping_add(rep as u64);
            let bd = BackdoorConfig {
                seed: run_seed,
                ..config.backdoor.clone()
            };
            let prep = (|| -> Result<_, HarnessError> {
                let split = split_dataset(
                    dataset,
                    config.split_ratios,
                    stage_seed(run_seed, Stage::SplitData),
                )?;
                let benign = train_benign_for_run(dataset, config, run_seed, &split)?;
                Ok((split, benign))
            })();
            let Ok((split, benign)) = prep else {
                return vec![vec![None; 8]; 8];
            };
            MotifId::ALL
                .iter()
                .map(|&train_motif| {
                    grid_row(dataset, config, &bd, &split, &benign, train_motif)
                        .unwrap_or_else(|_| vec![None; 8])
                })
                .collect()
        })
        .collect();

    // Mean over repetitions, cell by cell; a cell is defined when at least
    // one repetition produced it.
    let mut cells = vec![vec![None; 8]; 8];
    for (i, row) in cells.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let vals: Vec<f64> = per_rep.iter().filter_map(|rep| rep[i][j]).collect();
            *cell = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    SeriesGrid { cells }
}

fn grid_row<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    bd: &BackdoorConfig,
    split: &Split,
    benign: &GnnModel<S>,
    train_motif: MotifId,
) -> Result<Vec<Option<f64>>, HarnessError> {
    let outcome = run_attack(
        dataset,
        split,
        config.victim_arch,
        TriggerSpec::FixedMotif(train_motif),
        PlacementSpec::Random,
        bd,
        &config.train,
        Some(benign.clone()),
    )?;
    let test = crate::attack::subset(dataset, &split.test_idx);
    let placer = outcome.eval_placer(PlacementSpec::Random, bd);
    Ok(MotifId::ALL
        .iter()
        .map(|&infer_motif| {
            let trigger: Trigger<S> =
                Trigger::from_motif(infer_motif, bd.trigger_max_edges).ok()?;
            let outcomes = attack_outcomes(
                &outcome.backdoored,
                &test,
                &trigger,
                &placer,
                bd.target_label,
                None,
            )
            .ok()?;
            let successes = outcomes.iter().filter(|o| o.is_some()).count();
            Some(successes as f64 / outcomes.len() as f64)
        })
        .collect())
}

/// Parameter swept by `sensitivity_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    FilterCount,
    PoisonRate,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::FilterCount => "k",
            SweepParam::PoisonRate => "p",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "k" => Some(SweepParam::FilterCount),
            "p" => Some(SweepParam::PoisonRate),
            _ => None,
        }
    }
}

/// One full experiment per value; rows carry the mean and std of the
/// success rate. Values whose every run failed yield a NaN mean.
pub fn sensitivity_sweep<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Vec<SweepRow> {
    assert!(!values.is_empty(), "sweep needs at least one value");
    values
        .iter()
        .map(|&value| {
            let mut cfg = config.clone();
            match param {
                SweepParam::FilterCount => cfg.backdoor.filter_count = value as usize,
                SweepParam::PoisonRate => cfg.backdoor.poison_rate = value,
            }
            let report = run_experiment(dataset, &cfg);
            let asrs: Vec<f64> = report.rows.iter().map(|r| r.asr).collect();
            let (mean, std) = if asrs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let m = asrs.iter().sum::<f64>() / asrs.len() as f64;
                let v = asrs.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / asrs.len() as f64;
                (m, v.sqrt())
            };
            SweepRow {
                param: param.name().to_string(),
                value,
                asr_mean: mean,
                asr_std: std,
            }
        })
        .collect()
}

/// Runs the configured attack and evaluates it twice per repetition, without
/// and with the link-pruning defense; defended rows carry a `-def` suffix.
pub fn run_defense_comparison<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    drop_fraction: f64,
) -> ExperimentReport {
    let results: Vec<Result<(RunRow, RunRow), RunFailure>> = (0..config.repetitions)
        .into_par_iter()
        .map(|i| {
            defended_run(dataset, config, i, drop_fraction).map_err(|e| RunFailure {
                run_id: format!("run-{i}"),
                seed: config.backdoor.seed.wrapping_add(i as u64),
                attack: config.attack.name().to_string(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((plain, defended)) => {
                rows.push(plain);
                rows.push(defended);
            }
            Err(f) => failures.push(f),
        }
    }
    ExperimentReport::new(rows, failures)
}

fn defended_run<S: Scalar>(
    dataset: &Dataset<S>,
    config: &ExperimentConfig,
    run_index: usize,
    drop_fraction: f64,
) -> Result<(RunRow, RunRow), HarnessError> {
    let artifacts = single_run(dataset, config, run_index)?;
    let run_seed = artifacts.row.seed;
    let bd = BackdoorConfig {
        seed: run_seed,
        ..config.backdoor.clone()
    };
    let (_, placement) = config.attack.specs();
    let test = crate::attack::subset(dataset, &artifacts.split.test_idx);
    let placer = artifacts.outcome.eval_placer(placement, &bd);
    let started = Instant::now();
    let defended = evaluate_attack_pruned(
        &artifacts.outcome.backdoored,
        &artifacts.outcome.benign,
        &test,
        &artifacts.outcome.trigger,
        &placer,
        bd.target_label,
        drop_fraction,
    )?;
    let def_row = RunRow {
        attack: format!("{}-def", config.attack.name()),
        asr: defended.asr,
        amc: defended.amc.map(|v| v.to_f64().unwrap()),
        bad: defended.bad,
        benign_acc: defended.benign_acc,
        wall_time_s: started.elapsed().as_secs_f64(),
        ..artifacts.row.clone()
    };
    Ok((artifacts.row, def_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> ExperimentConfig {
        ExperimentConfig {
            repetitions: 2,
            train: TrainConfig {
                epochs: 4,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn experiment_produces_one_row_per_repetition() {
        let dataset: Dataset<f64> = smoke_corpus(60, 5);
        let report = run_experiment(&dataset, &quick_config());
        assert_eq!(report.rows.len(), 2);
        assert!(report.failures.is_empty());
        assert_eq!(report.rows[0].run_id, "run-0");
        assert_eq!(report.rows[1].seed, report.rows[0].seed + 1);
        let agg = report.aggregates();
        assert_eq!(agg.len(), 1);
        let mean = (report.rows[0].asr + report.rows[1].asr) / 2.0;
        assert!((agg[0].asr.0 - mean).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_give_identical_metric_rows() {
        let dataset: Dataset<f64> = smoke_corpus(60, 5);
        let config = quick_config();
        let a = run_experiment(&dataset, &config);
        let b = run_experiment(&dataset, &config);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.asr, y.asr);
            assert_eq!(x.amc, y.amc);
            assert_eq!(x.bad, y.bad);
            assert_eq!(x.benign_acc, y.benign_acc);
        }
    }

    #[test]
    fn failures_are_recorded_not_propagated() {
        let dataset: Dataset<f64> = smoke_corpus(60, 5);
        let mut config = quick_config();
        config.backdoor.poison_rate = 0.001; // floor(0.001 * 45) == 0
        let report = run_experiment(&dataset, &config);
        assert!(report.rows.is_empty());
        assert_eq!(report.failures.len(), 2);
        assert!(report.failures[0].error.contains("poison budget"));
    }

    #[test]
    fn black_box_audit_queries_equal_available_size() {
        let dataset: Dataset<f64> = smoke_corpus(60, 5);
        let config = quick_config();
        let (_, artifacts) = run_experiment_full(&dataset, &config);
        for a in &artifacts {
            assert_eq!(a.outcome.target_queries, a.outcome.available_size as u64);
            assert_eq!(a.outcome.available_size, a.split.train_idx.len());
        }

        // Baselines never touch the oracle.
        let mut config = quick_config();
        config.attack = AttackKind::MotifR;
        let (_, artifacts) = run_experiment_full(&dataset, &config);
        for a in &artifacts {
            assert_eq!(a.outcome.target_queries, 0);
        }
    }
}
