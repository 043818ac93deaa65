//! Desk-scale simulator for attack-free and Byzantine-resilient decentralized
//! SGD on strongly convex tasks.
//!
//! The crate is organized around the lifecycle of one experiment:
//!
//! - [`graph`] builds agent topologies and doubly stochastic mixing matrices,
//!   and computes the spectral quantities `lambda` and `chi_sq`.
//! - [`data`] provides labeled pools (synthetic Gaussian classes or IDX
//!   files), Dirichlet partitioning across agents, and single-sample
//!   perturbations for stability experiments.
//! - [`loss`] is the learning task: l2-regularized softmax regression with
//!   analytic gradients and certified strong-convexity/smoothness constants.
//! - [`aggregate`] implements weighted mean, trimmed mean, iterative outlier
//!   scissor, and self-centered clipping, plus an empirical contraction
//!   certifier.
//! - [`attack`] generates Byzantine messages (Gaussian, sample-duplicating,
//!   ALIE, sign-flipping).
//! - [`engine`] runs the synchronous gossip loop, collects metric traces, and
//!   drives coupled-trajectory stability estimation.
//! - [`bounds`] evaluates the closed-form bound expressions so empirical
//!   traces can be overlaid on theory.
//!
//! Everything is deterministic given a master seed: randomness fans out
//! through addressable substreams ([`rng::substream`]) so results are
//! byte-identical under any parallelism degree.

pub mod aggregate;
pub mod attack;
pub mod bounds;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod loss;
pub mod rng;

pub use error::SimError;
