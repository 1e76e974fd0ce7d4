//! Deeper probe: retraining strength and placement diagnostics.

use mblab::attack::*;
use mblab::graph::split_dataset;
use mblab::harness::*;
use mblab::metrics::attack_outcomes;
use mblab::nn::{accuracy, TrainConfig};
use mblab::Real;

fn main() {
    let dataset = smoke_corpus::<Real>(SMOKE_GRAPHS, 2024);
    let config = ExperimentConfig::default();

    for retrain_epochs in [100usize, 200] {
        for attack in [AttackKind::MotifBackdoor, AttackKind::MotifR, AttackKind::ErB, AttackKind::MaxDcc] {
            let mut asrs = Vec::new();
            let mut bads = Vec::new();
            for rep in 0..5u64 {
                let run_seed = rep;
                let split = split_dataset(&dataset, (0.75, 0.05, 0.2), stage_seed(run_seed, Stage::SplitData)).unwrap();
                let bd = BackdoorConfig { seed: run_seed, ..config.backdoor.clone() };
                let tc = TrainConfig { epochs: retrain_epochs, ..config.train.clone() };
                let (tspec, pspec) = attack.specs();
                let out = run_attack(&dataset, &split, config.victim_arch, tspec, pspec, &bd, &tc, None).unwrap();
                let test = subset(&dataset, &split.test_idx);
                let placer = out.eval_placer(pspec, &bd);
                let outs = attack_outcomes(&out.backdoored, &test, &out.trigger, &placer, bd.target_label, None).unwrap();
                let asr = outs.iter().filter(|o| o.is_some()).count() as f64 / outs.len() as f64;
                let b_acc = accuracy(&out.benign, &test).unwrap();
                let bd_acc = accuracy(&out.backdoored, &test).unwrap();
                // poisoned-set fit: how many poisoned train graphs the model classifies as target
                asrs.push(asr);
                bads.push(b_acc - bd_acc);
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "epochs {retrain_epochs} {:15} asr {:?} mean {:.3} | bad mean {:+.3}",
                attack.name(),
                asrs.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>(),
                mean(&asrs),
                mean(&bads),
            );
        }
    }
}
