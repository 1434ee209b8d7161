//! Topology attacks: projected gradient descent over the relaxed edge
//! budget, randomized rounding back to discrete toggles, a min-max variant
//! against a retraining defender, and two reference baselines.
//!
//! All attacks share a contract: given a graph, a victim model, and a
//! target (node set plus reference labels), produce a binary perturbation
//! spending at most `budget` edge toggles, together with the perturbed
//! adjacency and before/after misclassification rates. The gradient-based
//! attacks additionally expose the relaxed solution and a per-iteration
//! trace of the objective they minimize.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gcn::{
    attack_loss, loss_and_grads, loss_and_weight_grads, misclassification_rate, AttackTarget,
    GcnModel,
};
use crate::graph::{
    apply_perturbation, normalize_adjacency, sym_pair, Graph, PerturbationMode,
    PerturbationVector,
};
use crate::losses::AttackLossKind;
use crate::projection::{project, DEFAULT_TOLERANCE};
use crate::seed;

/// Learning-rate schedule for the perturbation updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `numerator / sqrt(t)` with `t` counted from 1.
    InverseSqrt {
        /// Step size at the first iteration.
        numerator: f64,
    },
    /// The same rate at every iteration.
    Constant {
        /// Fixed step size.
        value: f64,
    },
}

impl StepSchedule {
    /// Step size at 1-based iteration `t`.
    pub fn rate(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseSqrt { numerator } => numerator / (t as f64).sqrt(),
            StepSchedule::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        let rate = self.rate(1);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!("step size {rate} must be positive")));
        }
        Ok(())
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::InverseSqrt { numerator: 200.0 }
    }
}

/// Settings shared by the gradient-based attacks.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Maximum number of edge toggles.
    pub budget: usize,
    /// Objective the attacker minimizes.
    pub loss: AttackLossKind,
    /// Outer iterations of projected gradient descent.
    pub iters: usize,
    /// Learning-rate schedule for the perturbation.
    pub step_schedule: StepSchedule,
    /// Bernoulli draws during randomized rounding.
    pub rounding_trials: usize,
    /// Seed for every randomized stage of the attack.
    pub seed: u64,
    /// Weight-ascent steps per outer iteration (min-max attack only).
    pub inner_steps: usize,
    /// Learning rate of those weight-ascent steps.
    pub inner_lr: f64,
}

impl AttackConfig {
    /// Defaults tuned for desk-scale graphs: 200 iterations at step
    /// `200/sqrt(t)`, 20 rounding draws, 20 inner ascent steps at 0.01.
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            loss: AttackLossKind::default(),
            iters: 200,
            step_schedule: StepSchedule::default(),
            rounding_trials: 20,
            seed: 0,
            inner_steps: 20,
            inner_lr: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.step_schedule.validate()?;
        if self.iters == 0 {
            return Err(Error::Config("attack needs at least one iteration".into()));
        }
        if self.rounding_trials == 0 {
            return Err(Error::Config("rounding needs at least one trial".into()));
        }
        if !(self.inner_lr > 0.0 && self.inner_lr.is_finite()) {
            return Err(Error::Config(format!(
                "inner learning rate {} must be positive",
                self.inner_lr
            )));
        }
        Ok(())
    }
}

/// Misclassification of the victim before and after the attack, measured
/// against ground-truth labels on the target node set.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    /// Rate on the clean topology.
    pub clean: f64,
    /// Rate on the perturbed topology.
    pub attacked: f64,
}

/// Everything an attack produces.
#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Relaxed solution in `[0, 1]ⁿ` (all-zero for baselines that never
    /// relax).
    pub s_relaxed: PerturbationVector,
    /// Discrete edge toggles actually applied.
    pub s_binary: PerturbationVector,
    /// Objective value per iteration; empty for non-iterative baselines.
    pub loss_trace: Vec<f64>,
    /// Perturbed 0/1 adjacency.
    pub a_prime: Array2<f64>,
    /// Victim misclassification before and after.
    pub metrics: Metrics,
    /// Human-readable flags: zero budgets, rounding fallbacks, candidate
    /// shortfalls.
    pub notes: Vec<String>,
}

/// Min-max attack output: the perturbation plus the defender weights that
/// co-adapted to it.
#[derive(Debug, Clone)]
pub struct MinmaxOutcome {
    /// The attack evaluated against the original (natural) victim.
    pub attack: AttackResult,
    /// Weights after the inner ascent steps, i.e. the defender's best
    /// response along the attack trajectory.
    pub adapted_model: GcnModel,
    /// Misclassification of the adapted weights on the same node set.
    pub adapted_metrics: Metrics,
}

fn evaluate_metrics(
    model: &GcnModel,
    graph: &Graph,
    a_prime: &Array2<f64>,
    node_set: &[usize],
) -> Result<Metrics> {
    Ok(Metrics {
        clean: misclassification_rate(model, graph, graph.adjacency(), node_set)?,
        attacked: misclassification_rate(model, graph, a_prime, node_set)?,
    })
}

fn zero_budget_note(notes: &mut Vec<String>, budget: usize) {
    if budget == 0 {
        notes.push("budget is zero: no edge can be toggled".to_string());
    }
}

/// Rounds a relaxed perturbation to binary toggles within the budget.
///
/// Each of the `trials` draws sets every entry to 1 with probability equal
/// to its relaxed value; infeasible draws (more than `budget` toggles) are
/// discarded and the feasible draw with the smallest evaluated loss wins,
/// ties going to the earliest draw. If every draw is infeasible, the
/// entries with the largest relaxed values are taken deterministically
/// (ties towards the lower pair index) and the returned flag is `true`.
///
/// A binary input reproduces itself: probability-0 and probability-1 draws
/// are deterministic.
pub fn round_perturbation(
    s_relaxed: &Array1<f64>,
    budget: usize,
    trials: usize,
    seed: u64,
    eval: impl Fn(&PerturbationVector) -> Result<f64> + Sync,
) -> Result<(PerturbationVector, bool)> {
    if trials == 0 {
        return Err(Error::Config("rounding needs at least one trial".into()));
    }
    // Validates the [0, 1] bounds as a side effect.
    PerturbationVector::relaxed(s_relaxed.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feasible = Vec::new();
    for _ in 0..trials {
        let draw = s_relaxed.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        if draw.sum() <= budget as f64 {
            feasible.push(PerturbationVector::binary(draw)?);
        }
    }

    if feasible.is_empty() {
        let mut order: Vec<usize> = (0..s_relaxed.len()).collect();
        order.sort_by(|&a, &b| s_relaxed[b].partial_cmp(&s_relaxed[a]).unwrap());
        let mut values = Array1::zeros(s_relaxed.len());
        for &k in order.iter().take(budget) {
            if s_relaxed[k] > 0.0 {
                values[k] = 1.0;
            }
        }
        return Ok((PerturbationVector::binary(values)?, true));
    }

    let losses: Vec<f64> = feasible
        .par_iter()
        .map(|draw| eval(draw))
        .collect::<Result<_>>()?;
    let best = losses
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .expect("at least one feasible draw");
    Ok((feasible.swap_remove(best), false))
}

/// Projected gradient descent on the relaxed edge budget, followed by
/// randomized rounding.
///
/// Starting from the zero perturbation, each iteration takes a gradient
/// step on the attack objective and projects back onto
/// `{ s : 1ᵀs <= budget, s ∈ [0, 1]ⁿ }`. The trace records the objective
/// after every projection step.
pub fn pgd_attack(
    graph: &Graph,
    model: &GcnModel,
    target: &AttackTarget,
    config: &AttackConfig,
) -> Result<AttackResult> {
    config.validate()?;
    let mut notes = Vec::new();
    zero_budget_note(&mut notes, config.budget);

    let mut s = Array1::zeros(graph.num_pairs());
    let mut trace = Vec::with_capacity(config.iters);
    for t in 1..=config.iters {
        let current = PerturbationVector::relaxed(s.clone())?;
        let grads = loss_and_grads(model, graph, &current, target, config.loss)?;
        if t > 1 {
            // The objective at the point reached by the previous step.
            trace.push(grads.loss);
        }
        let eta = config.step_schedule.rate(t);
        let stepped = &s - &grads.grad_s.mapv(|g| eta * g);
        s = project(&stepped, config.budget as f64, DEFAULT_TOLERANCE)?.s;
    }
    let s_relaxed = PerturbationVector::relaxed(s.clone())?;
    trace.push(attack_loss(model, graph, &s_relaxed, target, config.loss)?);

    let (s_binary, fell_back) = round_perturbation(
        &s,
        config.budget,
        config.rounding_trials,
        seed::mix(config.seed, seed::STREAM_ROUNDING),
        |draw| attack_loss(model, graph, draw, target, config.loss),
    )?;
    if fell_back {
        notes.push(
            "randomized rounding found no feasible draw; used deterministic top-value rounding"
                .to_string(),
        );
    }
    let a_prime = apply_perturbation(graph.adjacency(), &s_binary)?;
    let metrics = evaluate_metrics(model, graph, &a_prime, target.node_set())?;
    Ok(AttackResult {
        s_relaxed,
        s_binary,
        loss_trace: trace,
        a_prime,
        metrics,
        notes,
    })
}

/// Min-max attack: the defender re-fits weights along the attack
/// trajectory, so the perturbation must damage a moving target.
///
/// Each outer iteration first lets the weights ascend the objective for
/// `inner_steps` plain gradient steps at the current perturbation (starting
/// from the supplied model's weights), then takes one projected descent
/// step on the perturbation. Rounding and the reported metrics use the
/// original model; the co-adapted weights and their metrics are returned
/// alongside. With `inner_steps = 0` the procedure reduces exactly to
/// [`pgd_attack`].
pub fn minmax_attack(
    graph: &Graph,
    model: &GcnModel,
    target: &AttackTarget,
    config: &AttackConfig,
) -> Result<MinmaxOutcome> {
    config.validate()?;
    let mut notes = Vec::new();
    zero_budget_note(&mut notes, config.budget);

    let mut weights = model.clone();
    let mut s = Array1::zeros(graph.num_pairs());
    let mut trace = Vec::with_capacity(config.iters);
    for t in 1..=config.iters {
        let current = PerturbationVector::relaxed(s.clone())?;
        if config.inner_steps > 0 {
            let a_prime = apply_perturbation(graph.adjacency(), &current)?;
            let a_tilde = normalize_adjacency(&a_prime)?;
            for _ in 0..config.inner_steps {
                let (_, grad_w0, grad_w1) = loss_and_weight_grads(
                    &weights,
                    &a_tilde,
                    graph.features(),
                    target,
                    config.loss,
                )?;
                weights.w0.zip_mut_with(&grad_w0, |w, &g| *w += config.inner_lr * g);
                weights.w1.zip_mut_with(&grad_w1, |w, &g| *w += config.inner_lr * g);
            }
        }
        let grads = loss_and_grads(&weights, graph, &current, target, config.loss)?;
        let eta = config.step_schedule.rate(t);
        let stepped = &s - &grads.grad_s.mapv(|g| eta * g);
        s = project(&stepped, config.budget as f64, DEFAULT_TOLERANCE)?.s;
        let reached = PerturbationVector::relaxed(s.clone())?;
        trace.push(attack_loss(&weights, graph, &reached, target, config.loss)?);
    }
    let s_relaxed = PerturbationVector::relaxed(s.clone())?;

    // The discrete attack is picked and scored against the original model:
    // the adapted weights exist to harden the perturbation, not to judge it.
    let (s_binary, fell_back) = round_perturbation(
        &s,
        config.budget,
        config.rounding_trials,
        seed::mix(config.seed, seed::STREAM_ROUNDING),
        |draw| attack_loss(model, graph, draw, target, config.loss),
    )?;
    if fell_back {
        notes.push(
            "randomized rounding found no feasible draw; used deterministic top-value rounding"
                .to_string(),
        );
    }
    let a_prime = apply_perturbation(graph.adjacency(), &s_binary)?;
    let metrics = evaluate_metrics(model, graph, &a_prime, target.node_set())?;
    let adapted_metrics = evaluate_metrics(&weights, graph, &a_prime, target.node_set())?;
    Ok(MinmaxOutcome {
        attack: AttackResult {
            s_relaxed,
            s_binary,
            loss_trace: trace,
            a_prime,
            metrics,
            notes,
        },
        adapted_model: weights,
        adapted_metrics,
    })
}

/// Random rewiring baseline: delete edges within a class, insert edges
/// across classes.
///
/// Each round flips a fair coin between deleting a uniformly chosen
/// same-label edge and inserting a uniformly chosen cross-label non-edge,
/// falling back to whichever pool is non-empty. The model plays no role in
/// choosing the perturbation; it is only evaluated. Uses ground-truth
/// labels by construction. If both pools run dry before the budget is
/// spent, a shortfall note is attached.
pub fn dice_attack(
    graph: &Graph,
    model: &GcnModel,
    target: &AttackTarget,
    budget: usize,
    seed: u64,
) -> Result<AttackResult> {
    let mut notes = Vec::new();
    zero_budget_note(&mut notes, budget);
    let n = graph.num_nodes();
    let labels = graph.labels();

    let mut deletions = Vec::new();
    let mut insertions = Vec::new();
    for k in 0..graph.num_pairs() {
        let (i, j) = sym_pair(k, n)?;
        let connected = graph.adjacency()[[i, j]] != 0.0;
        if connected && labels[i] == labels[j] {
            deletions.push(k);
        } else if !connected && labels[i] != labels[j] {
            insertions.push(k);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(seed, seed::STREAM_DICE));
    seed::shuffle(&mut deletions, &mut rng);
    seed::shuffle(&mut insertions, &mut rng);

    let mut values = Array1::zeros(graph.num_pairs());
    let mut spent = 0;
    while spent < budget {
        let prefer_delete = rng.random::<bool>();
        let pick = if (prefer_delete || insertions.is_empty()) && !deletions.is_empty() {
            deletions.pop()
        } else {
            insertions.pop()
        };
        match pick {
            Some(k) => {
                values[k] = 1.0;
                spent += 1;
            }
            None => {
                notes.push(format!(
                    "candidate pairs exhausted after {spent} of {budget} toggles"
                ));
                break;
            }
        }
    }

    let s_binary = PerturbationVector::binary(values)?;
    let a_prime = apply_perturbation(graph.adjacency(), &s_binary)?;
    let metrics = evaluate_metrics(model, graph, &a_prime, target.node_set())?;
    Ok(AttackResult {
        s_relaxed: PerturbationVector::zeros(graph.num_pairs(), PerturbationMode::Relaxed),
        s_binary,
        loss_trace: Vec::new(),
        a_prime,
        metrics,
        notes,
    })
}

/// Greedy coordinate baseline: spend the budget one toggle at a time,
/// always flipping the untouched pair whose gradient promises the largest
/// immediate decrease of the objective.
///
/// The gradient is re-evaluated at the current binary perturbation after
/// every flip, and exactly `budget` pairs end up toggled (pairs are never
/// untoggled). The trace records the objective after each flip.
pub fn greedy_attack(
    graph: &Graph,
    model: &GcnModel,
    target: &AttackTarget,
    budget: usize,
    loss: AttackLossKind,
) -> Result<AttackResult> {
    loss.validate()?;
    if budget > graph.num_pairs() {
        return Err(Error::Config(format!(
            "budget {budget} exceeds the {} available pairs",
            graph.num_pairs()
        )));
    }
    let mut notes = Vec::new();
    zero_budget_note(&mut notes, budget);

    let mut values = Array1::zeros(graph.num_pairs());
    let mut trace = Vec::with_capacity(budget);
    for _ in 0..budget {
        let current = PerturbationVector::binary(values.clone())?;
        let grads = loss_and_grads(model, graph, &current, target, loss)?;
        let mut best: Option<usize> = None;
        let mut best_gradient = f64::INFINITY;
        for (k, &g) in grads.grad_s.iter().enumerate() {
            if values[k] == 0.0 && g < best_gradient {
                best_gradient = g;
                best = Some(k);
            }
        }
        let k = best.expect("budget <= pair count leaves an untouched pair");
        values[k] = 1.0;
        trace.push(attack_loss(
            model,
            graph,
            &PerturbationVector::binary(values.clone())?,
            target,
            loss,
        )?);
    }

    let s_binary = PerturbationVector::binary(values)?;
    let a_prime = apply_perturbation(graph.adjacency(), &s_binary)?;
    let metrics = evaluate_metrics(model, graph, &a_prime, target.node_set())?;
    Ok(AttackResult {
        s_relaxed: PerturbationVector::zeros(graph.num_pairs(), PerturbationMode::Relaxed),
        s_binary,
        loss_trace: trace,
        a_prime,
        metrics,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{train_natural, TrainConfig};
    use crate::graph::Split;
    use ndarray::arr1;

    /// Two 4-cliques with a bridge, class-aligned features, half the nodes
    /// in each split.
    fn victim() -> (Graph, GcnModel, AttackTarget) {
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
        adjacency[[3, 4]] = 1.0;
        adjacency[[4, 3]] = 1.0;
        let features = Array2::from_shape_fn((n, 2), |(i, f)| {
            if f == i / 4 {
                1.0 + 0.05 * i as f64
            } else {
                0.1
            }
        });
        let labels: Vec<usize> = (0..n).map(|i| i / 4).collect();
        let split: Vec<Split> = (0..n)
            .map(|i| if i % 2 == 0 { Split::Train } else { Split::Test })
            .collect();
        let graph = Graph::new(adjacency, features, labels, 2, split).unwrap();
        let model = train_natural(&graph, &TrainConfig::default()).unwrap();
        let target = AttackTarget::ground_truth_test(&graph).unwrap();
        (graph, model, target)
    }

    fn quick_config(budget: usize) -> AttackConfig {
        AttackConfig {
            iters: 30,
            step_schedule: StepSchedule::InverseSqrt { numerator: 20.0 },
            ..AttackConfig::new(budget)
        }
    }

    #[test]
    fn step_schedule_decays_like_inverse_square_root() {
        let schedule = StepSchedule::default();
        assert!((schedule.rate(1) - 200.0).abs() < 1e-12);
        assert!((schedule.rate(4) - 100.0).abs() < 1e-12);
        assert!((schedule.rate(100) - 20.0).abs() < 1e-12);
        let constant = StepSchedule::Constant { value: 0.5 };
        assert_eq!(constant.rate(1), 0.5);
        assert_eq!(constant.rate(99), 0.5);
    }

    #[test]
    fn pgd_attack_respects_the_budget_and_lowers_the_loss() {
        let (graph, model, target) = victim();
        let config = quick_config(2);
        let result = pgd_attack(&graph, &model, &target, &config).unwrap();

        assert_eq!(result.loss_trace.len(), config.iters);
        assert!(result.s_relaxed.total() <= 2.0 + 1e-6);
        assert!(result.s_binary.total() <= 2.0);
        let initial = attack_loss(
            &model,
            &graph,
            &PerturbationVector::zeros(graph.num_pairs(), PerturbationMode::Relaxed),
            &target,
            config.loss,
        )
        .unwrap();
        let last = *result.loss_trace.last().unwrap();
        assert!(last < initial, "loss did not decrease: {initial} -> {last}");
        // The perturbed adjacency is still a valid 0/1 matrix.
        for v in result.a_prime.iter() {
            assert!(*v == 0.0 || *v == 1.0);
        }
    }

    #[test]
    fn pgd_attack_is_deterministic() {
        let (graph, model, target) = victim();
        let config = quick_config(2);
        let a = pgd_attack(&graph, &model, &target, &config).unwrap();
        let b = pgd_attack(&graph, &model, &target, &config).unwrap();
        assert_eq!(a.s_relaxed.values(), b.s_relaxed.values());
        assert_eq!(a.s_binary.values(), b.s_binary.values());
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn zero_budget_attack_leaves_the_graph_unchanged() {
        let (graph, model, target) = victim();
        let mut config = quick_config(0);
        config.iters = 5;
        let result = pgd_attack(&graph, &model, &target, &config).unwrap();
        assert_eq!(&result.a_prime, graph.adjacency());
        assert_eq!(result.s_binary.total(), 0.0);
        assert!(result.notes.iter().any(|n| n.contains("budget is zero")));
        assert_eq!(result.metrics.clean, result.metrics.attacked);
    }

    #[test]
    fn rounding_reproduces_binary_inputs() {
        let s = arr1(&[1.0, 0.0, 1.0, 0.0]);
        let (rounded, fell_back) =
            round_perturbation(&s, 2, 5, 7, |_| Ok(0.0)).unwrap();
        assert_eq!(rounded.values(), &s);
        assert!(!fell_back);
    }

    #[test]
    fn rounding_falls_back_when_every_draw_is_infeasible() {
        // Probability-1 entries always draw to 1, so with budget 1 every
        // draw spends 2 toggles and the deterministic path must kick in.
        let s = arr1(&[1.0, 1.0, 0.0]);
        let (rounded, fell_back) =
            round_perturbation(&s, 1, 10, 3, |_| Ok(0.0)).unwrap();
        assert!(fell_back);
        assert_eq!(rounded.values(), &arr1(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn rounding_picks_the_lowest_loss_draw() {
        // With fractional entries and a generous budget, every draw is
        // feasible; score draws by how many toggles they make so the
        // all-zero draw (if drawn) wins, otherwise the sparsest one.
        let s = arr1(&[0.5, 0.5, 0.5, 0.5]);
        let (rounded, fell_back) =
            round_perturbation(&s, 4, 40, 11, |d| Ok(d.total())).unwrap();
        assert!(!fell_back);
        // 40 draws of 4 fair coins: a zero-toggle draw appears with
        // probability 1 - (15/16)^40 ~ 0.92; accept any minimal draw but
        // insist the choice is deterministic.
        let (again, _) = round_perturbation(&s, 4, 40, 11, |d| Ok(d.total())).unwrap();
        assert_eq!(rounded.values(), again.values());
    }

    #[test]
    fn rounding_rejects_bad_inputs() {
        assert!(round_perturbation(&arr1(&[1.5]), 1, 5, 0, |_| Ok(0.0)).is_err());
        assert!(round_perturbation(&arr1(&[0.5]), 1, 0, 0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn minmax_with_zero_inner_steps_reduces_to_pgd() {
        let (graph, model, target) = victim();
        let config = AttackConfig {
            inner_steps: 0,
            ..quick_config(2)
        };
        let plain = pgd_attack(&graph, &model, &target, &config).unwrap();
        let minmax = minmax_attack(&graph, &model, &target, &config).unwrap();
        assert_eq!(
            plain.s_relaxed.values(),
            minmax.attack.s_relaxed.values()
        );
        assert_eq!(plain.s_binary.values(), minmax.attack.s_binary.values());
        assert_eq!(minmax.adapted_model.w0, model.w0);
    }

    #[test]
    fn minmax_inner_ascent_raises_the_objective_for_the_defender() {
        let (graph, model, target) = victim();
        let config = AttackConfig {
            iters: 10,
            inner_steps: 5,
            step_schedule: StepSchedule::InverseSqrt { numerator: 20.0 },
            ..AttackConfig::new(2)
        };
        let outcome = minmax_attack(&graph, &model, &target, &config).unwrap();
        assert_eq!(outcome.attack.loss_trace.len(), 10);
        assert!(outcome.attack.s_binary.total() <= 2.0);
        // The adapted weights were trained to resist the attack, so they
        // should not be more damaged by it than the frozen victim.
        assert!(
            outcome.adapted_metrics.attacked <= outcome.attack.metrics.attacked + 1e-12
        );
        // The weights genuinely moved.
        assert_ne!(outcome.adapted_model.w0, model.w0);
    }

    #[test]
    fn dice_attack_only_deletes_within_class_and_inserts_across() {
        let (graph, model, target) = victim();
        let budget = 4;
        let result = dice_attack(&graph, &model, &target, budget, 0).unwrap();
        assert_eq!(result.s_binary.total(), budget as f64);
        for (k, &v) in result.s_binary.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (i, j) = sym_pair(k, graph.num_nodes()).unwrap();
            let was_edge = graph.adjacency()[[i, j]] != 0.0;
            let same_label = graph.labels()[i] == graph.labels()[j];
            assert!(
                (was_edge && same_label) || (!was_edge && !same_label),
                "pair ({i}, {j}) violates the rewiring rule"
            );
        }
        assert!(result.loss_trace.is_empty());
    }

    #[test]
    fn dice_attack_notes_a_candidate_shortfall() {
        // A complete same-label graph admits deletions only; ask for more
        // toggles than there are edges.
        let n = 4;
        let mut adjacency = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
        let graph = Graph::new(
            adjacency,
            Array2::from_elem((n, 2), 0.5),
            vec![0; n],
            2,
            vec![Split::Train, Split::Train, Split::Test, Split::Test],
        )
        .unwrap();
        let model = GcnModel::glorot_init(2, 4, 2, 0).unwrap();
        let target = AttackTarget::ground_truth_test(&graph).unwrap();
        let result = dice_attack(&graph, &model, &target, 10, 0).unwrap();
        assert_eq!(result.s_binary.total(), 6.0); // all edges deleted
        assert!(result.notes.iter().any(|n| n.contains("exhausted")));
    }

    #[test]
    fn dice_attack_is_deterministic_per_seed() {
        let (graph, model, target) = victim();
        let a = dice_attack(&graph, &model, &target, 3, 5).unwrap();
        let b = dice_attack(&graph, &model, &target, 3, 5).unwrap();
        assert_eq!(a.s_binary.values(), b.s_binary.values());
        let c = dice_attack(&graph, &model, &target, 3, 6).unwrap();
        assert_ne!(a.s_binary.values(), c.s_binary.values());
    }

    #[test]
    fn greedy_attack_spends_the_budget_exactly() {
        let (graph, model, target) = victim();
        let result =
            greedy_attack(&graph, &model, &target, 3, AttackLossKind::CrossEntropy).unwrap();
        assert_eq!(result.s_binary.total(), 3.0);
        assert_eq!(result.loss_trace.len(), 3);
        let initial = attack_loss(
            &model,
            &graph,
            &PerturbationVector::zeros(graph.num_pairs(), PerturbationMode::Relaxed),
            &target,
            AttackLossKind::CrossEntropy,
        )
        .unwrap();
        assert!(*result.loss_trace.last().unwrap() < initial);
        assert!(greedy_attack(&graph, &model, &target, 1000, AttackLossKind::CrossEntropy).is_err());
    }

    #[test]
    fn attack_config_validation_catches_degenerate_settings() {
        let mut config = AttackConfig::new(2);
        config.iters = 0;
        assert!(config.validate().is_err());
        let mut config = AttackConfig::new(2);
        config.rounding_trials = 0;
        assert!(config.validate().is_err());
        let mut config = AttackConfig::new(2);
        config.inner_lr = 0.0;
        assert!(config.validate().is_err());
        let mut config = AttackConfig::new(2);
        config.step_schedule = StepSchedule::Constant { value: -1.0 };
        assert!(config.validate().is_err());
        assert!(AttackConfig::new(2).validate().is_ok());
    }
}
