//! Calibration probe for the smoke-corpus experiments.

use mblab::harness::*;
use mblab::Real;

fn main() {
    let t0 = std::time::Instant::now();
    let dataset = smoke_corpus::<Real>(SMOKE_GRAPHS, 2024);

    let config = ExperimentConfig::default();
    let (_, acc) = train_benign(&dataset, &config).unwrap();
    println!("[{:6.1?}] benign GCN test acc: {acc:.4}", t0.elapsed());

    for attack in [AttackKind::MotifBackdoor, AttackKind::MotifR, AttackKind::ErB, AttackKind::MaxDcc] {
        let cfg = ExperimentConfig {
            attack,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&dataset, &cfg);
        for f in &report.failures {
            println!("  FAIL {}: {}", f.run_id, f.error);
        }
        let agg = &report.aggregates()[0];
        println!(
            "[{:6.1?}] {:15} asr {:.4}±{:.4}  bad {:+.4}±{:.4}  benign_acc {:.4}  amc {:?}",
            t0.elapsed(),
            attack.name(),
            agg.asr.0,
            agg.asr.1,
            agg.bad.0,
            agg.bad.1,
            agg.benign_acc.0,
            agg.amc.map(|a| (a.0 * 1000.0).round() / 1000.0),
        );
    }

    let report = run_defense_comparison(&dataset, &ExperimentConfig::default(), 0.10);
    for agg in report.aggregates() {
        println!(
            "[{:6.1?}] defend {:20} asr {:.4}±{:.4}",
            t0.elapsed(),
            agg.attack,
            agg.asr.0,
            agg.asr.1
        );
    }
}
