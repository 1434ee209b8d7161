//! Scratch signal scan (not part of the deliverable).
use topoguard::attack::{dice_attack, pgd_attack, AttackConfig};
use topoguard::data::{generate_sbm, SbmSpec};
use topoguard::gcn::{misclassification_rate, train_natural, AttackTarget, TrainConfig};
use topoguard::graph::edge_budget;
use topoguard::losses::AttackLossKind;

fn main() {
    for &signal in &[0.02f64, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5] {
        let mut clean_m = 0.0;
        let mut ce_m = 0.0;
        let mut cw_m = 0.0;
        let mut dice_m = 0.0;
        let seeds = 5;
        for seed in 0..seeds {
            let graph = generate_sbm(&SbmSpec { seed, feature_signal: signal, ..SbmSpec::default() }).unwrap();
            let budget = edge_budget(graph.num_edges(), 0.05).unwrap();
            let natural = train_natural(&graph, &TrainConfig { seed, ..TrainConfig::default() }).unwrap();
            let test = graph.test_nodes();
            let clean = misclassification_rate(&natural, &graph, graph.adjacency(), &test).unwrap();
            let target = AttackTarget::pseudo_labeled_test(&graph, &natural).unwrap();
            let cfg = AttackConfig { seed, ..AttackConfig::new(budget) };
            let ce = pgd_attack(&graph, &natural, &target, &cfg).unwrap();
            let cw_cfg = AttackConfig { loss: AttackLossKind::margin(0.0).unwrap(), ..cfg.clone() };
            let cw = pgd_attack(&graph, &natural, &target, &cw_cfg).unwrap();
            let dice = dice_attack(&graph, &natural, &target, budget, seed).unwrap();
            clean_m += clean; ce_m += ce.metrics.attacked; cw_m += cw.metrics.attacked; dice_m += dice.metrics.attacked;
        }
        let k = seeds as f64;
        println!("signal {signal:.2}: clean {:.3} ce {:.3} cw {:.3} dice {:.3} | ce-clean {:+.1} cw-clean {:+.1} ce-dice {:+.1} cw-dice {:+.1}",
            clean_m/k, ce_m/k, cw_m/k, dice_m/k,
            (ce_m-clean_m)/k*100.0, (cw_m-clean_m)/k*100.0, (ce_m-dice_m)/k*100.0, (cw_m-dice_m)/k*100.0);
    }
}
