use mblab::attack::*;
use mblab::graph::split_dataset;
use mblab::harness::*;
use mblab::metrics::attack_outcomes;
use mblab::nn::{forward, GnnArch, TrainConfig};
use mblab::Real;

fn main() {
    let dataset = smoke_corpus::<Real>(SMOKE_GRAPHS, 2024);
    let config = ExperimentConfig::default();
    let split = split_dataset(&dataset, (0.75, 0.05, 0.2), stage_seed(0, Stage::SplitData)).unwrap();
    let bd = BackdoorConfig { seed: 0, ..config.backdoor.clone() };
    let tc = TrainConfig::default();
    let out = run_attack(&dataset, &split, GnnArch::Gcn, TriggerSpec::FromCensus,
        PlacementSpec::ShadowGuided, &bd, &tc, None).unwrap();
    println!("trigger: {} edges {:?}", out.trigger.source, out.trigger.topology.edges());
    let test = subset(&dataset, &split.test_idx);
    let placer = out.eval_placer(PlacementSpec::ShadowGuided, &bd);
    let outs = attack_outcomes(&out.backdoored, &test, &out.trigger, &placer, 1, None).unwrap();

    let attacked: Vec<_> = test.iter().filter(|(_, y)| *y != 1).collect();
    let mut resist_n = Vec::new();
    let mut flip_n = Vec::new();
    for ((g, _), o) in attacked.iter().zip(&outs) {
        let benign_p1 = forward(&out.benign, g).unwrap().probs[1];
        let plan = placer.place(g, 4, 0).unwrap();
        let degs: Vec<usize> = plan.node_ids.iter().map(|&i| g.degree(i)).collect();
        match o {
            Some(c) => { flip_n.push(g.num_nodes()); println!("FLIP n={:2} benign_p1 {:.2} conf {:.2} plan degs {:?}", g.num_nodes(), benign_p1, c, degs); }
            None => { resist_n.push(g.num_nodes()); println!("HOLD n={:2} benign_p1 {:.2} plan degs {:?}", g.num_nodes(), benign_p1, degs); }
        }
    }
    let mean = |v: &[usize]| if v.is_empty() { 0.0 } else { v.iter().sum::<usize>() as f64 / v.len() as f64 };
    println!("flipped mean n = {:.1}, resisted mean n = {:.1}", mean(&flip_n), mean(&resist_n));
}
