//! Topology attacks and robust training for graph convolutional networks.
//!
//! The crate treats an undirected graph's edge set as an attack surface: a
//! perturbation vector over all node pairs toggles edges within a budget,
//! and projected gradient descent over its convex relaxation finds the
//! toggles that most damage a trained two-layer GCN. The same machinery
//! runs in reverse for the defender, who trains weights against the worst
//! perturbation the attacker can find.
//!
//! Module map:
//!
//! * [`graph`] — graph storage, pair indexing, edge toggling, degree
//!   normalization;
//! * [`gcn`] — the model, exact gradients through the topology, natural
//!   training;
//! * [`losses`] — cross-entropy and margin attack objectives;
//! * [`projection`] — Euclidean projection onto the budgeted box;
//! * [`attack`] — projected gradient descent, randomized rounding, min-max
//!   attacks, and the rewiring/greedy baselines;
//! * [`defense`] — robust training against worst-case edge perturbations;
//! * [`data`] — file formats and the stochastic block model generator;
//! * [`report`] — deterministic run reports;
//! * [`error`] — shared error type with CLI exit-code mapping.

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod losses;
pub mod projection;
pub mod report;
pub mod seed;

pub use error::{Error, Result};
