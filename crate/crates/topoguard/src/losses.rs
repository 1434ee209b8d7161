//! Attack objectives evaluated on softmax outputs.
//!
//! An attacker perturbing the topology minimizes a per-node score summed
//! over a target node set. Two scores are supported:
//!
//! * cross-entropy type: `f_i = log z_{i, y_i}`, the log-probability of the
//!   reference class — pushing it down means pushing the node towards
//!   misclassification;
//! * margin (Carlini-Wagner) type: `f_i = max(z_{i, y_i} - max_{c != y_i}
//!   z_{i, c}, -kappa)`, the probability gap between the reference class
//!   and the strongest rival, clipped at `-kappa` so that nodes already
//!   misclassified by a margin of `kappa` stop contributing gradient.
//!
//! Both scores are negative (or barely positive) exactly when the node is
//! misclassified, so minimizing their sum trades off all targeted nodes.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Smallest probability fed into a logarithm; values below are clamped so
/// the cross-entropy score stays finite even for numerically zero entries.
pub const PROB_FLOOR: f64 = 1e-12;

/// Which per-node score the attacker aggregates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackLossKind {
    /// Cross-entropy type: `log z_y`.
    CrossEntropy,
    /// Margin type with confidence offset `kappa >= 0`.
    Margin {
        /// Clip level: per-node scores never fall below `-kappa`.
        kappa: f64,
    },
}

impl AttackLossKind {
    /// Margin score with a validated confidence level.
    pub fn margin(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Config(format!(
                "margin confidence kappa = {kappa} must be >= 0"
            )));
        }
        Ok(AttackLossKind::Margin { kappa })
    }

    /// Rejects hand-built values with an invalid `kappa`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackLossKind::CrossEntropy => Ok(()),
            AttackLossKind::Margin { kappa } => {
                AttackLossKind::margin(kappa).map(|_| ())
            }
        }
    }

    /// Short stable name used in file names and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            AttackLossKind::CrossEntropy => "ce",
            AttackLossKind::Margin { .. } => "cw",
        }
    }
}

impl Default for AttackLossKind {
    fn default() -> Self {
        AttackLossKind::CrossEntropy
    }
}

fn check_row(z_row: &ArrayView1<f64>, y: usize) -> Result<()> {
    if y >= z_row.len() {
        return Err(Error::Index(format!(
            "reference class {y} out of range for {} classes",
            z_row.len()
        )));
    }
    if z_row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("probability row contains non-finite values".into()));
    }
    Ok(())
}

/// Cross-entropy-type score `log z_y` for one node.
///
/// Probabilities below [`PROB_FLOOR`] are clamped before the logarithm, so
/// the score is bounded below by `ln(1e-12)`; inside that clamp the score is
/// constant and carries no gradient.
pub fn ce_node_loss(z_row: ArrayView1<f64>, y: usize) -> Result<f64> {
    check_row(&z_row, y)?;
    Ok(z_row[y].max(PROB_FLOOR).ln())
}

/// Margin-type score `max(z_y - max_{c != y} z_c, -kappa)` for one node.
///
/// Requires at least two classes; with a single class no rival exists and
/// the margin is undefined.
pub fn cw_node_loss(z_row: ArrayView1<f64>, y: usize, kappa: f64) -> Result<f64> {
    check_row(&z_row, y)?;
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(Error::Config(format!(
            "margin confidence kappa = {kappa} must be >= 0"
        )));
    }
    let (margin, _) = margin_and_rival(z_row, y)?;
    Ok(margin.max(-kappa))
}

/// Margin `z_y - max_{c != y} z_c` together with the strongest rival class
/// (first index on ties). Shared by the score and its gradient.
pub(crate) fn margin_and_rival(z_row: ArrayView1<f64>, y: usize) -> Result<(f64, usize)> {
    if z_row.len() < 2 {
        return Err(Error::Config(
            "margin score needs at least two classes".into(),
        ));
    }
    let mut rival = usize::MAX;
    let mut best = f64::NEG_INFINITY;
    for (c, &p) in z_row.iter().enumerate() {
        if c != y && p > best {
            best = p;
            rival = c;
        }
    }
    Ok((z_row[y] - best, rival))
}

/// Sum of per-node scores over a target node set.
///
/// `labels` carries one reference class per graph node; `node_set` selects
/// the rows of `z` that contribute. Duplicate or out-of-range nodes and an
/// empty node set are rejected.
pub fn total_attack_loss(
    z: &Array2<f64>,
    labels: &[usize],
    node_set: &[usize],
    kind: AttackLossKind,
) -> Result<f64> {
    kind.validate()?;
    if node_set.is_empty() {
        return Err(Error::Config("attack node set is empty".into()));
    }
    if labels.len() != z.nrows() {
        return Err(Error::Shape(format!(
            "{} labels for {} probability rows",
            labels.len(),
            z.nrows()
        )));
    }
    let mut seen = vec![false; z.nrows()];
    let mut total = 0.0;
    for &node in node_set {
        if node >= z.nrows() {
            return Err(Error::Index(format!(
                "node {node} out of range for {} rows",
                z.nrows()
            )));
        }
        if seen[node] {
            return Err(Error::Config(format!(
                "node {node} appears twice in the attack node set"
            )));
        }
        seen[node] = true;
        let row = z.row(node);
        total += match kind {
            AttackLossKind::CrossEntropy => ce_node_loss(row, labels[node])?,
            AttackLossKind::Margin { kappa } => cw_node_loss(row, labels[node], kappa)?,
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn ce_loss_is_log_of_reference_probability() {
        let z = arr1(&[0.7, 0.2, 0.1]);
        assert!((ce_node_loss(z.view(), 0).unwrap() - 0.7f64.ln()).abs() < 1e-15);
        assert!((ce_node_loss(z.view(), 2).unwrap() - 0.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ce_loss_clamps_vanishing_probabilities() {
        let z = arr1(&[1.0, 0.0]);
        let loss = ce_node_loss(z.view(), 1).unwrap();
        assert!((loss - PROB_FLOOR.ln()).abs() < 1e-12);
        assert!(loss.is_finite());
    }

    #[test]
    fn cw_loss_is_probability_margin() {
        let z = arr1(&[0.5, 0.3, 0.2]);
        // Correctly classified: margin 0.5 - 0.3 = 0.2.
        assert!((cw_node_loss(z.view(), 0, 0.0).unwrap() - 0.2).abs() < 1e-15);
        // Misclassified node with kappa = 0: the raw margin 0.2 - 0.5 =
        // -0.3 clips up to the level -kappa = 0.
        assert_eq!(cw_node_loss(z.view(), 2, 0.0).unwrap(), 0.0);
        // With kappa = 0.2 the same node scores max(-0.3, -0.2) = -0.2.
        assert!((cw_node_loss(z.view(), 2, 0.2).unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn cw_loss_on_exact_tie_keeps_margin_branch() {
        // margin = -kappa exactly: max leaves the margin value (the two
        // branches agree in value; gradient code takes the margin side).
        let z = arr1(&[0.4, 0.6]);
        assert!((cw_node_loss(z.view(), 0, 0.2).unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn cw_loss_needs_two_classes_and_nonnegative_kappa() {
        let z = arr1(&[1.0]);
        assert!(cw_node_loss(z.view(), 0, 0.0).is_err());
        let z = arr1(&[0.5, 0.5]);
        assert!(cw_node_loss(z.view(), 0, -0.5).is_err());
        assert!(AttackLossKind::margin(-1.0).is_err());
        assert!(AttackLossKind::margin(0.0).is_ok());
    }

    #[test]
    fn per_node_losses_reject_bad_class_index() {
        let z = arr1(&[0.5, 0.5]);
        assert!(ce_node_loss(z.view(), 2).is_err());
        assert!(cw_node_loss(z.view(), 2, 0.0).is_err());
    }

    #[test]
    fn total_loss_sums_selected_rows() {
        let z = arr2(&[[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]]);
        let labels = vec![0, 1, 0];
        let total =
            total_attack_loss(&z, &labels, &[0, 1], AttackLossKind::CrossEntropy).unwrap();
        let expected = 0.9f64.ln() + 0.8f64.ln();
        assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn total_loss_rejects_degenerate_node_sets() {
        let z = arr2(&[[0.9, 0.1], [0.2, 0.8]]);
        let labels = vec![0, 1];
        assert!(total_attack_loss(&z, &labels, &[], AttackLossKind::CrossEntropy).is_err());
        assert!(
            total_attack_loss(&z, &labels, &[0, 0], AttackLossKind::CrossEntropy).is_err()
        );
        assert!(total_attack_loss(&z, &labels, &[5], AttackLossKind::CrossEntropy).is_err());
        let short_labels = vec![0];
        assert!(
            total_attack_loss(&z, &short_labels, &[0], AttackLossKind::CrossEntropy).is_err()
        );
    }

    #[test]
    fn misclassified_nodes_score_negative_under_both_losses() {
        // Node predicted as class 1 but referenced as class 0.
        let z = arr2(&[[0.3, 0.7]]);
        let ce = total_attack_loss(&z, &[0], &[0], AttackLossKind::CrossEntropy).unwrap();
        assert!(ce < 0.0);
        let cw =
            total_attack_loss(&z, &[0], &[0], AttackLossKind::margin(1.0).unwrap()).unwrap();
        assert!(cw < 0.0);
    }

    #[test]
    fn loss_tags_are_stable() {
        assert_eq!(AttackLossKind::CrossEntropy.tag(), "ce");
        assert_eq!(AttackLossKind::margin(0.0).unwrap().tag(), "cw");
        assert_eq!(AttackLossKind::default(), AttackLossKind::CrossEntropy);
    }
}
