//! Two-layer graph convolutional network with exact gradients through the
//! topology.
//!
//! The model computes `logits = Ã · ReLU(Ã · X · W0) · W1` where `Ã` is the
//! symmetrically normalized adjacency with self-loops and `X` are the node
//! features; class probabilities are the row-wise softmax of the logits.
//!
//! Besides the usual weight gradients, [`loss_and_grads`] differentiates an
//! attack objective with respect to the edge-perturbation vector `s`. The
//! chain runs through the perturbed adjacency `A' = A + C ∘ S`, the degree
//! normalization (whose scaling couples every incident entry), the two
//! propagation layers, and the softmax — all in closed form, so gradient
//! checks against finite differences must agree to near machine precision.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{apply_perturbation, normalize_adjacency, sym_pair, Graph, PerturbationVector};
use crate::losses::{self, AttackLossKind, PROB_FLOOR};
use crate::seed;

/// Hidden width used by naturally trained models.
pub const DEFAULT_HIDDEN_WIDTH: usize = 16;

/// Weights of the two propagation layers.
///
/// `w0` maps input features to the hidden layer (`input_dim x hidden`),
/// `w1` maps hidden activations to class logits (`hidden x num_classes`).
#[derive(Debug, Clone)]
pub struct GcnModel {
    /// First-layer weights, `input_dim x hidden`.
    pub w0: Array2<f64>,
    /// Second-layer weights, `hidden x num_classes`.
    pub w1: Array2<f64>,
}

impl GcnModel {
    /// Wraps explicit weight matrices, checking that the hidden dimensions
    /// agree.
    pub fn from_weights(w0: Array2<f64>, w1: Array2<f64>) -> Result<Self> {
        if w0.ncols() != w1.nrows() {
            return Err(Error::Shape(format!(
                "hidden width mismatch: w0 is {}x{} but w1 is {}x{}",
                w0.nrows(),
                w0.ncols(),
                w1.nrows(),
                w1.ncols()
            )));
        }
        if w0.iter().chain(w1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("model weights contain non-finite values".into()));
        }
        Ok(Self { w0, w1 })
    }

    /// Glorot-uniform initialization: each layer is drawn from
    /// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot_init(
        input_dim: usize,
        hidden_width: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_width == 0 || num_classes == 0 {
            return Err(Error::Config(format!(
                "model dimensions must be positive, got {input_dim}/{hidden_width}/{num_classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
        };
        let w0 = layer(input_dim, hidden_width);
        let w1 = layer(hidden_width, num_classes);
        Ok(Self { w0, w1 })
    }

    /// Input feature dimension.
    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    /// Hidden layer width.
    pub fn hidden_width(&self) -> usize {
        self.w0.ncols()
    }

    /// Number of output classes.
    pub fn num_classes(&self) -> usize {
        self.w1.ncols()
    }
}

/// Logits and row-softmax probabilities for every node.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Pre-softmax scores, one row per node.
    pub logits: Array2<f64>,
    /// Row-stochastic class probabilities.
    pub probabilities: Array2<f64>,
}

impl Prediction {
    /// Most probable class per node, breaking ties towards the lower index.
    pub fn labels(&self) -> Vec<usize> {
        self.probabilities
            .rows()
            .into_iter()
            .map(|row| argmax(row.iter().cloned()))
            .collect()
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    best
}

/// The nodes an attack objective is evaluated on, plus the reference label
/// for every node in the graph.
///
/// Reference labels may be ground truth (training-time objectives) or the
/// predictions of an independently trained model (pseudo-labels, so that a
/// test-time attacker needs no access to held-out truth).
#[derive(Debug, Clone)]
pub struct AttackTarget {
    node_set: Vec<usize>,
    labels: Vec<usize>,
}

impl AttackTarget {
    /// Validates a node set against per-node reference labels.
    ///
    /// The node set must be non-empty and duplicate-free, every node must
    /// index into `labels`, and every label must be below `num_classes`.
    pub fn new(node_set: Vec<usize>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if node_set.is_empty() {
            return Err(Error::Config("attack node set is empty".into()));
        }
        let mut seen = vec![false; labels.len()];
        for &node in &node_set {
            if node >= labels.len() {
                return Err(Error::Index(format!(
                    "target node {node} out of range for {} nodes",
                    labels.len()
                )));
            }
            if seen[node] {
                return Err(Error::Config(format!(
                    "node {node} appears twice in the attack node set"
                )));
            }
            seen[node] = true;
        }
        if let Some((node, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &label)| label >= num_classes)
        {
            return Err(Error::Index(format!(
                "reference label {label} of node {node} exceeds {num_classes} classes"
            )));
        }
        Ok(Self { node_set, labels })
    }

    /// Ground-truth labels over an explicit node set.
    pub fn ground_truth(graph: &Graph, node_set: Vec<usize>) -> Result<Self> {
        Self::new(node_set, graph.labels().to_vec(), graph.num_classes())
    }

    /// Ground-truth labels over the test nodes.
    pub fn ground_truth_test(graph: &Graph) -> Result<Self> {
        Self::ground_truth(graph, graph.test_nodes())
    }

    /// Ground-truth labels over the training nodes.
    pub fn ground_truth_train(graph: &Graph) -> Result<Self> {
        Self::ground_truth(graph, graph.train_nodes())
    }

    /// Test-node target labelled by a trained model's own predictions on
    /// the clean graph, so the attack never touches held-out ground truth.
    pub fn pseudo_labeled_test(graph: &Graph, model: &GcnModel) -> Result<Self> {
        let a_tilde = normalize_adjacency(graph.adjacency())?;
        let prediction = forward(model, &a_tilde, graph.features())?;
        Self::new(graph.test_nodes(), prediction.labels(), graph.num_classes())
    }

    /// Nodes the objective sums over.
    pub fn node_set(&self) -> &[usize] {
        &self.node_set
    }

    /// Reference label per graph node.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Loss value with gradients for both the weights and the perturbation.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Attack objective value `f`.
    pub loss: f64,
    /// Gradient with respect to the first-layer weights.
    pub grad_w0: Array2<f64>,
    /// Gradient with respect to the second-layer weights.
    pub grad_w1: Array2<f64>,
    /// Gradient with respect to the pair-perturbation vector, length
    /// `N(N-1)/2`.
    pub grad_s: Array1<f64>,
}

struct ForwardPieces {
    /// `X · W0`.
    xw0: Array2<f64>,
    /// Pre-activation `Ã · X · W0`.
    u: Array2<f64>,
    /// Hidden activations `ReLU(u)`.
    h1: Array2<f64>,
    /// Propagated hidden layer `Ã · h1`.
    ah1: Array2<f64>,
    logits: Array2<f64>,
    z: Array2<f64>,
}

fn check_forward_shapes(model: &GcnModel, a_tilde: &Array2<f64>, features: &Array2<f64>) -> Result<()> {
    let (rows, cols) = a_tilde.dim();
    if rows != cols {
        return Err(Error::Shape(format!(
            "normalized adjacency must be square, got {rows}x{cols}"
        )));
    }
    if features.nrows() != rows {
        return Err(Error::Shape(format!(
            "{} feature rows for {rows} nodes",
            features.nrows()
        )));
    }
    if features.ncols() != model.input_dim() {
        return Err(Error::Shape(format!(
            "{} feature columns but the model expects {}",
            features.ncols(),
            model.input_dim()
        )));
    }
    Ok(())
}

fn forward_pieces(
    model: &GcnModel,
    a_tilde: &Array2<f64>,
    features: &Array2<f64>,
) -> Result<ForwardPieces> {
    check_forward_shapes(model, a_tilde, features)?;
    let xw0 = features.dot(&model.w0);
    let u = a_tilde.dot(&xw0);
    let h1 = u.mapv(|v| v.max(0.0));
    let ah1 = a_tilde.dot(&h1);
    let logits = ah1.dot(&model.w1);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forward pass produced non-finite logits".into()));
    }
    let z = row_softmax(&logits);
    Ok(ForwardPieces {
        xw0,
        u,
        h1,
        ah1,
        logits,
        z,
    })
}

fn row_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut z = logits.clone();
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    z
}

/// Runs the model on a normalized adjacency.
pub fn forward(model: &GcnModel, a_tilde: &Array2<f64>, features: &Array2<f64>) -> Result<Prediction> {
    let pieces = forward_pieces(model, a_tilde, features)?;
    Ok(Prediction {
        logits: pieces.logits,
        probabilities: pieces.z,
    })
}

/// Gradient of the attack objective with respect to the logits; rows
/// outside the target node set are zero.
///
/// Where a score is clipped — a cross-entropy probability at the
/// [`PROB_FLOOR`] clamp, or a margin below `-kappa` — the objective is
/// locally constant and the row stays zero, keeping the analytic gradient
/// consistent with the evaluated loss. An exact `margin == -kappa` tie
/// takes the live margin branch.
fn output_gradient(z: &Array2<f64>, target: &AttackTarget, kind: AttackLossKind) -> Result<Array2<f64>> {
    let num_classes = z.ncols();
    let mut dlogits = Array2::zeros(z.raw_dim());
    for &node in target.node_set() {
        let row = z.row(node);
        let y = target.labels()[node];
        match kind {
            AttackLossKind::CrossEntropy => {
                if row[y] >= PROB_FLOOR {
                    for c in 0..num_classes {
                        let indicator = if c == y { 1.0 } else { 0.0 };
                        dlogits[[node, c]] = indicator - row[c];
                    }
                }
            }
            AttackLossKind::Margin { kappa } => {
                let (margin, rival) = losses::margin_and_rival(row, y)?;
                if margin >= -kappa {
                    // d margin / d z = e_y - e_rival, pulled back through
                    // the softmax: dv_c = z_c * (dz_c - dz · z).
                    let dz_dot_z = row[y] - row[rival];
                    for c in 0..num_classes {
                        let dz = if c == y {
                            1.0
                        } else if c == rival {
                            -1.0
                        } else {
                            0.0
                        };
                        dlogits[[node, c]] = row[c] * (dz - dz_dot_z);
                    }
                }
            }
        }
    }
    Ok(dlogits)
}

fn check_target(target: &AttackTarget, graph: &Graph) -> Result<()> {
    if target.labels().len() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "target carries {} labels for a {}-node graph",
            target.labels().len(),
            graph.num_nodes()
        )));
    }
    Ok(())
}

/// Evaluates the attack objective at a perturbation without gradients.
pub fn attack_loss(
    model: &GcnModel,
    graph: &Graph,
    s: &PerturbationVector,
    target: &AttackTarget,
    kind: AttackLossKind,
) -> Result<f64> {
    kind.validate()?;
    check_target(target, graph)?;
    let a_prime = apply_perturbation(graph.adjacency(), s)?;
    let a_tilde = normalize_adjacency(&a_prime)?;
    let pieces = forward_pieces(model, &a_tilde, graph.features())?;
    losses::total_attack_loss(&pieces.z, target.labels(), target.node_set(), kind)
}

/// Evaluates the attack objective and differentiates it with respect to
/// both weight matrices and the edge-perturbation vector.
///
/// Accepts any perturbation inside the unit box — relaxed iterates, binary
/// candidates, or the zero vector alike. The `grad_s` entry for pair
/// `(i, j)` accounts for both symmetric positions of the pair and for the
/// degree-normalization coupling of all entries incident to `i` or `j`.
pub fn loss_and_grads(
    model: &GcnModel,
    graph: &Graph,
    s: &PerturbationVector,
    target: &AttackTarget,
    kind: AttackLossKind,
) -> Result<Gradients> {
    kind.validate()?;
    check_target(target, graph)?;
    let n = graph.num_nodes();
    let a_prime = apply_perturbation(graph.adjacency(), s)?;

    // Normalization pieces are kept for the backward pass.
    let mut a_hat = a_prime;
    for i in 0..n {
        a_hat[[i, i]] += 1.0;
    }
    let mut degrees = Array1::zeros(n);
    let mut t = Array1::zeros(n);
    for j in 0..n {
        let degree: f64 = a_hat.column(j).sum();
        if !degree.is_finite() {
            return Err(Error::Numeric(format!("degree of node {j} is not finite")));
        }
        if degree <= 0.0 {
            return Err(Error::Degeneracy(format!(
                "node {j} has non-positive degree {degree}"
            )));
        }
        degrees[j] = degree;
        t[j] = 1.0 / degree.sqrt();
    }
    let mut a_tilde = a_hat.clone();
    for i in 0..n {
        for j in 0..n {
            a_tilde[[i, j]] *= t[i] * t[j];
        }
    }

    let pieces = forward_pieces(model, &a_tilde, graph.features())?;
    let loss = losses::total_attack_loss(&pieces.z, target.labels(), target.node_set(), kind)?;
    let dlogits = output_gradient(&pieces.z, target, kind)?;

    // Weight gradients.
    let grad_w1 = pieces.ah1.t().dot(&dlogits);
    let dah1 = dlogits.dot(&model.w1.t());
    let dh1 = a_tilde.t().dot(&dah1);
    let mut du = dh1;
    du.zip_mut_with(&pieces.u, |g, &u| {
        if u <= 0.0 {
            *g = 0.0;
        }
    });
    let grad_w0 = graph.features().t().dot(&a_tilde.t().dot(&du));

    // Gradient with respect to the normalized adjacency: both layers read
    // Ã, once against h1·W1 and once against X·W0.
    let hw1 = pieces.h1.dot(&model.w1);
    let g = dlogits.dot(&hw1.t()) + du.dot(&pieces.xw0.t());

    // Through the normalization Ã_ij = t_i t_j Â_ij with t = d^{-1/2} and
    // d the column sums of Â. The scale sensitivity collects both the row
    // and column occurrences of t_r:
    //   d f / d t_r = sum_j (G_rj + G_jr) Â_rj t_j,
    // and a unit change of Â_pq moves the degree d_q for every p.
    let g_sym = &g + &g.t();
    let mut dt = Array1::zeros(n);
    for r in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += g_sym[[r, j]] * a_hat[[r, j]] * t[j];
        }
        dt[r] = acc;
    }
    let mut dd = Array1::zeros(n);
    for q in 0..n {
        dd[q] = dt[q] * (-0.5) * degrees[q].powf(-1.5);
    }

    // Collapse onto the pair vector: pair (i, j) occupies Â_ij and Â_ji,
    // and moves along the complement direction C_ij.
    let mut grad_s = Array1::zeros(graph.num_pairs());
    for k in 0..grad_s.len() {
        let (i, j) = sym_pair(k, n)?;
        let da_ij = g[[i, j]] * t[i] * t[j] + dd[j];
        let da_ji = g[[j, i]] * t[j] * t[i] + dd[i];
        let direction = 1.0 - 2.0 * graph.adjacency()[[i, j]];
        grad_s[k] = direction * (da_ij + da_ji);
    }

    Ok(Gradients {
        loss,
        grad_w0,
        grad_w1,
        grad_s,
    })
}

/// Loss and weight gradients at a fixed normalized adjacency.
///
/// Training loops hold the topology constant for many consecutive weight
/// updates, so they skip the perturbation chain entirely.
pub(crate) fn loss_and_weight_grads(
    model: &GcnModel,
    a_tilde: &Array2<f64>,
    features: &Array2<f64>,
    target: &AttackTarget,
    kind: AttackLossKind,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let pieces = forward_pieces(model, a_tilde, features)?;
    let loss = losses::total_attack_loss(&pieces.z, target.labels(), target.node_set(), kind)?;
    let dlogits = output_gradient(&pieces.z, target, kind)?;
    let grad_w1 = pieces.ah1.t().dot(&dlogits);
    let dah1 = dlogits.dot(&model.w1.t());
    let dh1 = a_tilde.t().dot(&dah1);
    let mut du = dh1;
    du.zip_mut_with(&pieces.u, |g, &u| {
        if u <= 0.0 {
            *g = 0.0;
        }
    });
    let grad_w0 = features.t().dot(&a_tilde.t().dot(&du));
    Ok((loss, grad_w0, grad_w1))
}

/// Natural (clean-graph) training settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Hidden layer width.
    pub hidden_width: usize,
    /// Number of full-batch epochs.
    pub epochs: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            epochs: 200,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// First-order moment estimates for one weight matrix under Adam.
struct AdamState {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl AdamState {
    fn new(shape: (usize, usize)) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    fn update(&mut self, weights: &mut Array2<f64>, grad: &Array2<f64>, lr: f64, step: usize) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let t = step as f64;
        let bias1 = 1.0 - BETA1.powf(t);
        let bias2 = 1.0 - BETA2.powf(t);
        ndarray::Zip::from(weights)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|w, m, v, &g| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + EPS);
            });
    }
}

/// Fits a model on the clean graph by minimizing the mean training
/// cross-entropy with Adam.
pub fn train_natural(graph: &Graph, config: &TrainConfig) -> Result<GcnModel> {
    config.validate()?;
    let train_nodes = graph.train_nodes();
    if train_nodes.is_empty() {
        return Err(Error::Config("graph has no training nodes".into()));
    }
    let target = AttackTarget::ground_truth(graph, train_nodes)?;
    let a_tilde = normalize_adjacency(graph.adjacency())?;
    let mut model = GcnModel::glorot_init(
        graph.features().ncols(),
        config.hidden_width,
        graph.num_classes(),
        seed::mix(config.seed, seed::STREAM_WEIGHT_INIT),
    )?;
    let mut adam0 = AdamState::new(model.w0.dim());
    let mut adam1 = AdamState::new(model.w1.dim());
    let count = target.node_set().len() as f64;
    for epoch in 1..=config.epochs {
        let (_, grad_w0, grad_w1) = loss_and_weight_grads(
            &model,
            &a_tilde,
            graph.features(),
            &target,
            AttackLossKind::CrossEntropy,
        )?;
        // The objective sums log-probabilities; minimize the mean negative
        // log-likelihood.
        let g0 = grad_w0.mapv(|g| -g / count);
        let g1 = grad_w1.mapv(|g| -g / count);
        adam0.update(&mut model.w0, &g0, config.learning_rate, epoch);
        adam1.update(&mut model.w1, &g1, config.learning_rate, epoch);
    }
    Ok(model)
}

/// Fraction of `node_set` whose prediction on the (possibly perturbed)
/// topology disagrees with the ground-truth label.
pub fn misclassification_rate(
    model: &GcnModel,
    graph: &Graph,
    a_prime: &Array2<f64>,
    node_set: &[usize],
) -> Result<f64> {
    if node_set.is_empty() {
        return Err(Error::Config("evaluation node set is empty".into()));
    }
    let mut seen = vec![false; graph.num_nodes()];
    for &node in node_set {
        if node >= graph.num_nodes() {
            return Err(Error::Index(format!(
                "evaluation node {node} out of range for {} nodes",
                graph.num_nodes()
            )));
        }
        if seen[node] {
            return Err(Error::Config(format!(
                "node {node} appears twice in the evaluation node set"
            )));
        }
        seen[node] = true;
    }
    let a_tilde = normalize_adjacency(a_prime)?;
    let prediction = forward(model, &a_tilde, graph.features())?;
    let labels = prediction.labels();
    let wrong = node_set
        .iter()
        .filter(|&&node| labels[node] != graph.labels()[node])
        .count();
    Ok(wrong as f64 / node_set.len() as f64)
}
