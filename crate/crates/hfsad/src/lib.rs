//! Hierarchical federated smoothing ADMM for non-convex, non-smooth
//! consensus optimization.
//!
//! The crate is organized as:
//! - [`prox`]: scalar/vector proximal operators (soft threshold, SCAD, MCP,
//!   smoothed TV, robust phase-retrieval loss).
//! - [`smoothing`]: sqrt-law penalty/smoothing schedules and the checkable
//!   consensus preconditions.
//! - [`engine`]: the client / cluster-head / server update rules as pure
//!   state transitions.
//! - [`simulator`]: deterministic orchestration with asynchronous
//!   participation and a staleness bound.
//! - [`problems`]: benchmark generation (sparse robust phase retrieval,
//!   mixture-exponential noise) and the centralized subgradient baseline.
//! - [`harness`]: scenario configs, trial orchestration, and CSV/JSON
//!   metrics emission.
//! - [`oracle`]: brute-force reference minimizers for verification.

// validation guards use `!(x > 0.0)` on purpose: the negated form also
// rejects NaN, which `x <= 0.0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod simulator;
pub mod smoothing;
pub mod stream;
pub mod vecops;

pub use error::Error;
