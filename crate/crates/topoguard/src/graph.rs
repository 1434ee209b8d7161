//! Graph representation and edge-flip primitives.
//!
//! An undirected graph on `N` nodes is stored as a dense symmetric 0/1
//! adjacency matrix together with node features, labels, and train/test
//! masks. Attacks operate on the `n = N(N-1)/2` upper-triangular node pairs
//! through a perturbation vector `s`: entry `k` of `s` toggles the pair
//! `(i, j) = sym_pair(k)`, deleting the edge if it exists and inserting it
//! otherwise. The perturbed adjacency is
//!
//! ```text
//! A' = A + C ∘ S,    C = (11ᵀ - I) - 2A,
//! ```
//!
//! where `S` is the symmetric matrix holding `s` in both triangles and `C`
//! points every off-diagonal entry towards its complement: `+1` where an
//! edge is absent, `-1` where one is present, `0` on the diagonal. Relaxed
//! vectors (`s ∈ [0, 1]ⁿ`) produce fractional edge weights; binary vectors
//! produce another 0/1 adjacency.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Number of unordered node pairs in a graph with `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Index of the unordered pair `(i, j)`, `i < j`, in the row-major
/// upper-triangular enumeration `(0,1), (0,2), ..., (n-2, n-1)`.
pub fn sym_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j {
        return Err(Error::Index(format!(
            "pair ({i}, {j}) must satisfy i < j"
        )));
    }
    if j >= n {
        return Err(Error::Index(format!(
            "pair ({i}, {j}) out of range for {n} nodes"
        )));
    }
    Ok(i * n - i * (i + 1) / 2 + (j - i - 1))
}

/// Inverse of [`sym_index`]: the pair `(i, j)` stored at position `k`.
pub fn sym_pair(k: usize, n: usize) -> Result<(usize, usize)> {
    if k >= pair_count(n) {
        return Err(Error::Index(format!(
            "pair index {k} out of range for {n} nodes ({} pairs)",
            pair_count(n)
        )));
    }
    let mut i = 0;
    let mut remaining = k;
    loop {
        let row_len = n - 1 - i;
        if remaining < row_len {
            return Ok((i, i + 1 + remaining));
        }
        remaining -= row_len;
        i += 1;
    }
}

/// Whether a perturbation vector is constrained to `{0, 1}` or `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// Entries may take any value in `[0, 1]`.
    Relaxed,
    /// Entries are exactly `0.0` or `1.0`.
    Binary,
}

/// A validated edge-perturbation vector over the upper-triangular pairs.
#[derive(Debug, Clone)]
pub struct PerturbationVector {
    values: Array1<f64>,
    mode: PerturbationMode,
}

impl PerturbationVector {
    /// Wraps a relaxed vector, rejecting entries outside `[0, 1]` or
    /// non-finite values.
    pub fn relaxed(values: Array1<f64>) -> Result<Self> {
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "perturbation entry {k} is not finite"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "relaxed perturbation entry {k} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            values,
            mode: PerturbationMode::Relaxed,
        })
    }

    /// Wraps a binary vector, rejecting anything but exact `0.0` / `1.0`.
    pub fn binary(values: Array1<f64>) -> Result<Self> {
        for (k, &v) in values.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Config(format!(
                    "binary perturbation entry {k} = {v} is not 0 or 1"
                )));
            }
        }
        Ok(Self {
            values,
            mode: PerturbationMode::Binary,
        })
    }

    /// The all-zero vector over `n` pairs (valid in both modes; tagged
    /// with the given one).
    pub fn zeros(n: usize, mode: PerturbationMode) -> Self {
        Self {
            values: Array1::zeros(n),
            mode,
        }
    }

    /// Raw entries in pair order.
    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    /// Whether the vector is binary or relaxed.
    pub fn mode(&self) -> PerturbationMode {
        self.mode
    }

    /// Number of pair entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the vector covers zero pairs.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of the entries; for binary vectors this is the number of edge
    /// toggles (the Hamming distance between `A` and `A'`).
    pub fn total(&self) -> f64 {
        self.values.sum()
    }
}

/// The complement-direction matrix `C = (11ᵀ - I) - 2A`.
///
/// Multiplying entry-wise with a symmetric perturbation matrix moves every
/// selected pair towards its complement: absent edges (`C = +1`) are
/// inserted, present edges (`C = -1`) deleted, and the diagonal (`C = 0`)
/// stays untouched.
#[derive(Debug, Clone)]
pub struct ComplementDirection {
    matrix: Array2<f64>,
}

impl ComplementDirection {
    /// Builds the direction matrix for a 0/1 adjacency.
    pub fn from_adjacency(adjacency: &Array2<f64>) -> Result<Self> {
        check_adjacency(adjacency)?;
        let n = adjacency.nrows();
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                0.0
            } else {
                1.0 - 2.0 * adjacency[[i, j]]
            }
        });
        Ok(Self { matrix })
    }

    /// The dense direction matrix.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Direction for the pair `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[[i, j]]
    }
}

fn check_adjacency(adjacency: &Array2<f64>) -> Result<()> {
    let (rows, cols) = adjacency.dim();
    if rows != cols {
        return Err(Error::Shape(format!(
            "adjacency must be square, got {rows}x{cols}"
        )));
    }
    for i in 0..rows {
        if adjacency[[i, i]] != 0.0 {
            return Err(Error::Config(format!("adjacency has a self-loop at node {i}")));
        }
        for j in (i + 1)..cols {
            let v = adjacency[[i, j]];
            if v != 0.0 && v != 1.0 {
                return Err(Error::Config(format!(
                    "adjacency entry ({i}, {j}) = {v} is not 0 or 1"
                )));
            }
            if v != adjacency[[j, i]] {
                return Err(Error::Config(format!(
                    "adjacency is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Applies a perturbation vector to a 0/1 adjacency: `A' = A + C ∘ S`.
///
/// For binary `s` the result is again a 0/1 adjacency and applying the same
/// vector a second time restores the original matrix. Relaxed vectors yield
/// fractional edge weights in `[0, 1]`.
pub fn apply_perturbation(
    adjacency: &Array2<f64>,
    s: &PerturbationVector,
) -> Result<Array2<f64>> {
    check_adjacency(adjacency)?;
    let n = adjacency.nrows();
    if s.len() != pair_count(n) {
        return Err(Error::Shape(format!(
            "perturbation has {} entries but {n} nodes need {}",
            s.len(),
            pair_count(n)
        )));
    }
    let mut perturbed = adjacency.clone();
    for (k, &v) in s.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (i, j) = sym_pair(k, n)?;
        let direction = 1.0 - 2.0 * adjacency[[i, j]];
        let updated = adjacency[[i, j]] + direction * v;
        perturbed[[i, j]] = updated;
        perturbed[[j, i]] = updated;
    }
    Ok(perturbed)
}

/// Symmetric degree normalization with self-loops:
/// `Ã = D̂^{-1/2} (A' + I) D̂^{-1/2}` where `D̂` holds the column sums of
/// `Â = A' + I`.
///
/// Accepts any symmetric non-negative matrix (an attack may pass fractional
/// weights). Fails with a degeneracy error if any node ends up with a
/// non-positive degree, which cannot happen while `A'` stays in `[0, 1]`.
pub fn normalize_adjacency(a_prime: &Array2<f64>) -> Result<Array2<f64>> {
    let (rows, cols) = a_prime.dim();
    if rows != cols {
        return Err(Error::Shape(format!(
            "adjacency must be square, got {rows}x{cols}"
        )));
    }
    let n = rows;
    let mut a_hat = a_prime.clone();
    for i in 0..n {
        a_hat[[i, i]] += 1.0;
    }
    let mut scale = Array1::zeros(n);
    for j in 0..n {
        let degree: f64 = a_hat.column(j).sum();
        if !degree.is_finite() {
            return Err(Error::Numeric(format!(
                "degree of node {j} is not finite"
            )));
        }
        if degree <= 0.0 {
            return Err(Error::Degeneracy(format!(
                "node {j} has non-positive degree {degree}"
            )));
        }
        scale[j] = 1.0 / degree.sqrt();
    }
    let mut normalized = a_hat;
    for i in 0..n {
        for j in 0..n {
            normalized[[i, j]] *= scale[i] * scale[j];
        }
    }
    Ok(normalized)
}

/// Edge budget for a perturbation-ratio setting: `max(1, floor(ratio * M))`
/// where `M` is the clean edge count.
///
/// The ratio must lie in `(0, 1]`; a budget of zero edges is expressed by
/// skipping the attack entirely rather than by `ratio = 0`.
pub fn edge_budget(num_edges: usize, ratio: f64) -> Result<usize> {
    if num_edges == 0 {
        return Err(Error::Config(
            "cannot derive an edge budget for a graph with no edges".into(),
        ));
    }
    if !ratio.is_finite() || ratio <= 0.0 || ratio > 1.0 {
        return Err(Error::Config(format!(
            "perturbation ratio {ratio} outside (0, 1]"
        )));
    }
    Ok(((ratio * num_edges as f64).floor() as usize).max(1))
}

/// Which partition a node belongs to during training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// Used to fit model weights.
    Train,
    /// Held out for evaluation.
    Test,
    /// Not used by either phase.
    None,
}

/// An attributed, labelled, undirected graph with a train/test split.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Array2<f64>,
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    split: Vec<Split>,
}

impl Graph {
    /// Validates and assembles a graph.
    ///
    /// The adjacency must be a symmetric 0/1 matrix with a zero diagonal;
    /// features need one row per node; every label must be below
    /// `num_classes`; and the split must cover every node.
    pub fn new(
        adjacency: Array2<f64>,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        split: Vec<Split>,
    ) -> Result<Self> {
        check_adjacency(&adjacency)?;
        let n = adjacency.nrows();
        if features.nrows() != n {
            return Err(Error::Shape(format!(
                "{} feature rows for {n} nodes",
                features.nrows()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("features contain non-finite values".into()));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
        }
        if num_classes == 0 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if let Some((node, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &label)| label >= num_classes)
        {
            return Err(Error::Index(format!(
                "node {node} has label {label} but only {num_classes} classes exist"
            )));
        }
        if split.len() != n {
            return Err(Error::Shape(format!(
                "{} split entries for {n} nodes",
                split.len()
            )));
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            num_classes,
            split,
        })
    }

    /// Number of nodes `N`.
    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Number of undirected edges `M`.
    pub fn num_edges(&self) -> usize {
        let n = self.num_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Number of unordered node pairs `n = N(N-1)/2`.
    pub fn num_pairs(&self) -> usize {
        pair_count(self.num_nodes())
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    /// Node feature matrix, one row per node.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Ground-truth class labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Per-node split assignment.
    pub fn split(&self) -> &[Split] {
        &self.split
    }

    /// Indices of training nodes, ascending.
    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_in(Split::Train)
    }

    /// Indices of test nodes, ascending.
    pub fn test_nodes(&self) -> Vec<usize> {
        self.nodes_in(Split::Test)
    }

    fn nodes_in(&self, which: Split) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == which)
            .map(|(i, _)| i)
            .collect()
    }
}
