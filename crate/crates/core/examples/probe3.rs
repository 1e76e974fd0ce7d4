use mblab::harness::*;
use mblab::nn::GnnArch;
use mblab::Real;

fn main() {
    let dataset = smoke_corpus::<Real>(SMOKE_GRAPHS, 2024);
    for arch in [GnnArch::Gcn, GnnArch::Gin] {
        let config = ExperimentConfig { victim_arch: arch, ..ExperimentConfig::default() };
        let (_, acc) = train_benign(&dataset, &config).unwrap();
        println!("{:?} benign test acc: {acc:.4}", arch);
        for attack in [AttackKind::MotifBackdoor, AttackKind::MotifR, AttackKind::ErB, AttackKind::MaxDcc] {
            let cfg = ExperimentConfig { victim_arch: arch, attack, ..ExperimentConfig::default() };
            let report = run_experiment(&dataset, &cfg);
            for f in &report.failures { println!("  FAIL {}: {}", f.run_id, f.error); }
            let agg = &report.aggregates()[0];
            println!("  {:15} asr {:.3}±{:.3}  bad {:+.3}  asrs {:?}",
                attack.name(), agg.asr.0, agg.asr.1, agg.bad.0,
                report.rows.iter().map(|r| (r.asr * 100.0).round() / 100.0).collect::<Vec<_>>());
        }
    }
}
