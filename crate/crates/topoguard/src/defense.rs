//! Robust training against worst-case edge perturbations.
//!
//! The defender solves `max_W min_s f(s, W)`: weights are fitted so that
//! even the most damaging feasible perturbation leaves the training
//! cross-entropy objective as healthy as possible. Each outer iteration
//! runs a short projected-descent inner loop to approximate the minimizing
//! perturbation at the current weights, then takes one plain gradient
//! ascent step on the weights at that perturbation.
//!
//! By weak duality, swapping the order of the two players can only help
//! the one moving second: `max_W min_s f <= min_s max_W f`.
//! [`minmax_maxmin_gap`] evaluates both orderings at externally supplied
//! solutions so the inequality can be checked on real runs.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::gcn::{
    attack_loss, loss_and_grads, loss_and_weight_grads, AttackTarget, GcnModel,
};
use crate::graph::{
    apply_perturbation, normalize_adjacency, Graph, PerturbationVector,
};
use crate::losses::AttackLossKind;
use crate::projection::{project, DEFAULT_TOLERANCE};
use crate::attack::StepSchedule;
use crate::seed;

/// Hidden width used by robustly trained models; wider than the natural
/// default because the weights must absorb worst-case topology noise.
pub const ROBUST_HIDDEN_WIDTH: usize = 32;

/// Robust-training settings.
#[derive(Debug, Clone)]
pub struct DefenseConfig {
    /// Edge-toggle budget granted to the inner adversary.
    pub budget: usize,
    /// Outer iterations (one weight-ascent step each).
    pub outer_iters: usize,
    /// Learning rate of the weight-ascent step.
    pub weight_lr: f64,
    /// Step schedule of the inner perturbation descent; evaluated at the
    /// outer iteration number, so later outer rounds probe more gently.
    pub attack_schedule: StepSchedule,
    /// Projected-descent steps the inner adversary takes per outer round.
    pub inner_steps: usize,
    /// Hidden width of the robust model.
    pub hidden_width: usize,
    /// Seed for weight initialization.
    pub seed: u64,
    /// Keep the inner perturbation between outer rounds instead of
    /// restarting it from zero.
    pub warm_start: bool,
}

impl DefenseConfig {
    /// Defaults: 1000 outer rounds of ascent at 0.01, 20 inner descent
    /// steps per round, hidden width 32, warm-started perturbation.
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            outer_iters: 1000,
            weight_lr: 0.01,
            attack_schedule: StepSchedule::default(),
            inner_steps: 20,
            hidden_width: ROBUST_HIDDEN_WIDTH,
            seed: 0,
            warm_start: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::Config("robust training needs at least one iteration".into()));
        }
        if !(self.weight_lr > 0.0 && self.weight_lr.is_finite()) {
            return Err(Error::Config(format!(
                "weight learning rate {} must be positive",
                self.weight_lr
            )));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.budget > 0 && self.inner_steps == 0 {
            return Err(Error::Config(
                "a positive budget needs at least one inner descent step".into(),
            ));
        }
        Ok(())
    }
}

/// Robust model plus its per-iteration training diagnostics.
#[derive(Debug)]
pub struct DefenseOutcome {
    /// The robustly trained weights.
    pub model: GcnModel,
    /// Mean training cross-entropy at `(s_t, W_t)` after every outer
    /// round — the quantity the defender drives down under attack.
    pub loss_trace: Vec<f64>,
    /// Final inner perturbation (the adversary's last best response).
    pub s_final: PerturbationVector,
}

/// Trains weights by alternating worst-case perturbation search and
/// gradient ascent on the attacked training objective.
///
/// The inner adversary minimizes the summed training-node log-likelihood
/// over the relaxed budget set; a zero budget pins the perturbation at
/// zero exactly, reducing the procedure to plain gradient training on the
/// clean graph.
pub fn adversarial_train(graph: &Graph, config: &DefenseConfig) -> Result<DefenseOutcome> {
    config.validate()?;
    if graph.train_nodes().is_empty() {
        return Err(Error::Config("graph has no training nodes".into()));
    }
    let target = AttackTarget::ground_truth_train(graph)?;
    let loss = AttackLossKind::CrossEntropy;
    let count = target.node_set().len() as f64;

    let mut model = GcnModel::glorot_init(
        graph.features().ncols(),
        config.hidden_width,
        graph.num_classes(),
        seed::mix(config.seed, seed::STREAM_WEIGHT_INIT),
    )?;
    let mut s = Array1::zeros(graph.num_pairs());
    let mut trace = Vec::with_capacity(config.outer_iters);

    for t in 1..=config.outer_iters {
        if !config.warm_start {
            s.fill(0.0);
        }
        if config.budget > 0 {
            let eta = config.attack_schedule.rate(t);
            for _ in 0..config.inner_steps {
                let current = PerturbationVector::relaxed(s.clone())?;
                let grads = loss_and_grads(&model, graph, &current, &target, loss)?;
                let stepped = &s - &grads.grad_s.mapv(|g| eta * g);
                s = project(&stepped, config.budget as f64, DEFAULT_TOLERANCE)?.s;
            }
        }

        let current = PerturbationVector::relaxed(s.clone())?;
        let a_prime = apply_perturbation(graph.adjacency(), &current)?;
        let a_tilde = normalize_adjacency(&a_prime)?;
        let (_, grad_w0, grad_w1) =
            loss_and_weight_grads(&model, &a_tilde, graph.features(), &target, loss)?;
        model
            .w0
            .zip_mut_with(&grad_w0, |w, &g| *w += config.weight_lr * g);
        model
            .w1
            .zip_mut_with(&grad_w1, |w, &g| *w += config.weight_lr * g);

        let (after, _, _) =
            loss_and_weight_grads(&model, &a_tilde, graph.features(), &target, loss)?;
        trace.push(-after / count);
    }

    Ok(DefenseOutcome {
        model,
        loss_trace: trace,
        s_final: PerturbationVector::relaxed(s)?,
    })
}

/// Evaluates both orderings of the attack/defense game at supplied
/// solutions and returns `(maxmin_value, minmax_value)`.
///
/// `maxmin` pairs a robustly trained model with the perturbation found
/// against it (the defender committed first); `minmax` pairs an attack
/// perturbation with the weights that co-adapted to it (the attacker
/// committed first). Both sides are scored on the same objective — summed
/// training-node cross-entropy scores against ground truth — so weak
/// duality demands `maxmin_value <= minmax_value` up to solver slack.
pub fn minmax_maxmin_gap(
    graph: &Graph,
    maxmin_model: &GcnModel,
    maxmin_s: &PerturbationVector,
    minmax_model: &GcnModel,
    minmax_s: &PerturbationVector,
) -> Result<(f64, f64)> {
    let target = AttackTarget::ground_truth_train(graph)?;
    let loss = AttackLossKind::CrossEntropy;
    let maxmin_value = attack_loss(maxmin_model, graph, maxmin_s, &target, loss)?;
    let minmax_value = attack_loss(minmax_model, graph, minmax_s, &target, loss)?;
    Ok((maxmin_value, minmax_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{minmax_attack, pgd_attack, AttackConfig};
    use crate::gcn::misclassification_rate;
    use crate::graph::Split;
    use ndarray::Array2;

    fn clique_pair_graph() -> Graph {
        let n = 8;
        let mut adjacency = Array2::zeros((n, n));
        for block in 0..2 {
            let base = block * 4;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    adjacency[[base + i, base + j]] = 1.0;
                    adjacency[[base + j, base + i]] = 1.0;
                }
            }
        }
        adjacency[[0, 4]] = 1.0;
        adjacency[[4, 0]] = 1.0;
        let features = Array2::from_shape_fn((n, 2), |(i, f)| {
            if f == i / 4 {
                0.9 + 0.05 * (i % 4) as f64
            } else {
                0.15
            }
        });
        let labels: Vec<usize> = (0..n).map(|i| i / 4).collect();
        let split: Vec<Split> = (0..n)
            .map(|i| if i % 2 == 0 { Split::Train } else { Split::Test })
            .collect();
        Graph::new(adjacency, features, labels, 2, split).unwrap()
    }

    fn quick_defense(budget: usize) -> DefenseConfig {
        DefenseConfig {
            outer_iters: 60,
            inner_steps: 5,
            attack_schedule: StepSchedule::InverseSqrt { numerator: 20.0 },
            hidden_width: 8,
            ..DefenseConfig::new(budget)
        }
    }

    #[test]
    fn zero_budget_defense_matches_plain_ascent_training() {
        let graph = clique_pair_graph();
        let config = quick_defense(0);
        let outcome = adversarial_train(&graph, &config).unwrap();
        assert_eq!(outcome.s_final.total(), 0.0);

        // Reference: the same ascent loop written against the clean graph.
        let target = AttackTarget::ground_truth_train(&graph).unwrap();
        let a_tilde = normalize_adjacency(graph.adjacency()).unwrap();
        let mut reference = GcnModel::glorot_init(
            2,
            config.hidden_width,
            2,
            seed::mix(config.seed, seed::STREAM_WEIGHT_INIT),
        )
        .unwrap();
        for _ in 0..config.outer_iters {
            let (_, g0, g1) = loss_and_weight_grads(
                &reference,
                &a_tilde,
                graph.features(),
                &target,
                AttackLossKind::CrossEntropy,
            )
            .unwrap();
            reference.w0.zip_mut_with(&g0, |w, &g| *w += config.weight_lr * g);
            reference.w1.zip_mut_with(&g1, |w, &g| *w += config.weight_lr * g);
        }
        assert_eq!(outcome.model.w0, reference.w0);
        assert_eq!(outcome.model.w1, reference.w1);
    }

    #[test]
    fn robust_training_drives_the_attacked_loss_down() {
        let graph = clique_pair_graph();
        let outcome = adversarial_train(&graph, &quick_defense(2)).unwrap();
        assert_eq!(outcome.loss_trace.len(), 60);
        let early: f64 = outcome.loss_trace[..5].iter().sum::<f64>() / 5.0;
        let late: f64 = outcome.loss_trace[55..].iter().sum::<f64>() / 5.0;
        assert!(
            late < early,
            "attacked training loss did not improve: {early} -> {late}"
        );
        // The inner perturbation stays within its budget.
        assert!(outcome.s_final.total() <= 2.0 + 1e-6);
        // The robust model still fits the training nodes on the clean graph.
        let rate = misclassification_rate(
            &outcome.model,
            &graph,
            graph.adjacency(),
            &graph.train_nodes(),
        )
        .unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn robust_training_is_deterministic_per_seed() {
        let graph = clique_pair_graph();
        let config = DefenseConfig {
            outer_iters: 15,
            ..quick_defense(2)
        };
        let a = adversarial_train(&graph, &config).unwrap();
        let b = adversarial_train(&graph, &config).unwrap();
        assert_eq!(a.model.w0, b.model.w0);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn swapping_player_order_never_helps_the_defender_first() {
        // maxmin: robust training then a fresh attack on the result.
        // minmax: attack with a co-adapting defender.
        let graph = clique_pair_graph();
        let budget = 2;
        let robust = adversarial_train(&graph, &quick_defense(budget)).unwrap();

        let target = AttackTarget::ground_truth_train(&graph).unwrap();
        let attack_config = AttackConfig {
            iters: 40,
            step_schedule: StepSchedule::InverseSqrt { numerator: 20.0 },
            ..AttackConfig::new(budget)
        };
        let counter = pgd_attack(&graph, &robust.model, &target, &attack_config).unwrap();

        let natural = crate::gcn::train_natural(
            &graph,
            &crate::gcn::TrainConfig {
                hidden_width: 8,
                ..Default::default()
            },
        )
        .unwrap();
        let minmax = minmax_attack(&graph, &natural, &target, &attack_config).unwrap();

        let (maxmin_value, minmax_value) = minmax_maxmin_gap(
            &graph,
            &robust.model,
            &counter.s_relaxed,
            &minmax.adapted_model,
            &minmax.attack.s_relaxed,
        )
        .unwrap();
        assert!(
            minmax_value - maxmin_value >= -1e-6,
            "weak duality violated: maxmin {maxmin_value} > minmax {minmax_value}"
        );
    }

    #[test]
    fn bilinear_toy_game_satisfies_weak_duality_on_a_grid() {
        // Exhaustive check of max_w min_s f <= min_s max_w f for
        // f(s, w) = c*s*w + a*s + b*w on a discrete grid, for a spread of
        // coefficients. Independent of all model code.
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for &(a, b, c) in &[
            (0.0, 0.0, 1.0),
            (0.5, -0.3, 1.0),
            (-0.4, 0.2, -1.5),
            (1.0, 1.0, 0.0),
            (-0.7, -0.9, 2.0),
        ] {
            let f = |s: f64, w: f64| c * s * w + a * s + b * w;
            let maxmin = grid
                .iter()
                .map(|&w| {
                    grid.iter()
                        .map(|&s| f(s, w))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let minmax = grid
                .iter()
                .map(|&s| {
                    grid.iter()
                        .map(|&w| f(s, w))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                maxmin <= minmax + 1e-12,
                "({a}, {b}, {c}): maxmin {maxmin} > minmax {minmax}"
            );
        }
    }

    #[test]
    fn defense_config_validation_catches_degenerate_settings() {
        let mut config = DefenseConfig::new(2);
        config.outer_iters = 0;
        assert!(config.validate().is_err());
        let mut config = DefenseConfig::new(2);
        config.weight_lr = -0.1;
        assert!(config.validate().is_err());
        let mut config = DefenseConfig::new(2);
        config.inner_steps = 0;
        assert!(config.validate().is_err());
        // Zero budget tolerates zero inner steps.
        let mut config = DefenseConfig::new(0);
        config.inner_steps = 0;
        assert!(config.validate().is_ok());
        let mut config = DefenseConfig::new(2);
        config.hidden_width = 0;
        assert!(config.validate().is_err());
    }
}
