//! Scratch calibration run (not part of the deliverable).
use std::time::Instant;

use topoguard::attack::{dice_attack, minmax_attack, pgd_attack, AttackConfig};
use topoguard::data::{generate_sbm, SbmSpec};
use topoguard::defense::{adversarial_train, DefenseConfig};
use topoguard::gcn::{misclassification_rate, train_natural, AttackTarget, TrainConfig};
use topoguard::graph::edge_budget;
use topoguard::losses::AttackLossKind;

fn main() {
    let signal: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0.8);
    let seeds: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(5);
    println!("feature_signal = {signal}");
    let mut agg = vec![];
    for seed in 0..seeds {
        let t0 = Instant::now();
        let graph = generate_sbm(&SbmSpec { seed, feature_signal: signal, ..SbmSpec::default() }).unwrap();
        let budget = edge_budget(graph.num_edges(), 0.05).unwrap();
        let natural = train_natural(&graph, &TrainConfig { seed, ..TrainConfig::default() }).unwrap();
        let test = graph.test_nodes();
        let clean = misclassification_rate(&natural, &graph, graph.adjacency(), &test).unwrap();
        let target = AttackTarget::pseudo_labeled_test(&graph, &natural).unwrap();

        let cfg = AttackConfig { seed, ..AttackConfig::new(budget) };
        let t1 = Instant::now();
        let ce = pgd_attack(&graph, &natural, &target, &cfg).unwrap();
        let t_pgd = t1.elapsed();
        let cw_cfg = AttackConfig { loss: AttackLossKind::margin(0.0).unwrap(), ..cfg.clone() };
        let cw = pgd_attack(&graph, &natural, &target, &cw_cfg).unwrap();
        let dice = dice_attack(&graph, &natural, &target, budget, seed).unwrap();
        let t2 = Instant::now();
        let mm = minmax_attack(&graph, &natural, &target, &cfg).unwrap();
        let t_mm = t2.elapsed();

        let t3 = Instant::now();
        let robust = adversarial_train(&graph, &DefenseConfig { seed, ..DefenseConfig::new(budget) }).unwrap();
        let t_def = t3.elapsed();
        let robust_clean = misclassification_rate(&robust.model, &graph, graph.adjacency(), &test).unwrap();
        let robust_target = AttackTarget::pseudo_labeled_test(&graph, &natural).unwrap();
        let atk_on_robust = pgd_attack(&graph, &robust.model, &robust_target, &cfg).unwrap();

        println!(
            "seed {seed}: M={} eps={} | clean {:.3} | ce {:.3} cw {:.3} dice {:.3} mm {:.3} (adapted {:.3}) | robust clean {:.3} attacked {:.3} | pgd {:?} mm {:?} defense {:?} total {:?}",
            graph.num_edges(), budget, clean,
            ce.metrics.attacked, cw.metrics.attacked, dice.metrics.attacked,
            mm.attack.metrics.attacked, mm.adapted_metrics.attacked,
            robust_clean, atk_on_robust.metrics.attacked,
            t_pgd, t_mm, t_def, t0.elapsed()
        );
        agg.push([clean, ce.metrics.attacked, cw.metrics.attacked, dice.metrics.attacked, mm.attack.metrics.attacked, robust_clean, atk_on_robust.metrics.attacked]);
    }
    let mean = |i: usize| agg.iter().map(|r| r[i]).sum::<f64>() / agg.len() as f64;
    println!("MEAN: clean {:.3} ce {:.3} cw {:.3} dice {:.3} mm {:.3} robust-clean {:.3} robust-attacked {:.3}", mean(0), mean(1), mean(2), mean(3), mean(4), mean(5), mean(6));
    println!("checks: ce-clean {:.1}pts (need >=5) | ce-dice {:.1}pts (need >=2) | natural-robust attacked {:.1}pts (need >=4) | robust clean gap {:.1}pts (need <=1.5)",
        (mean(1)-mean(0))*100.0, (mean(1)-mean(3))*100.0, (mean(1)-mean(6))*100.0, (mean(5)-mean(0))*100.0);
}
