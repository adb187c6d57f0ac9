//! Energy-efficient joint beamforming and antenna selection for multi-cell
//! multigroup multicast downlinks.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] holds the scenario data (channels, groups, power model) and
//!   exact performance evaluation: SINR, group rates, consumed power, and
//!   energy efficiency.
//! * [`conic`] is a small backend-independent conic-program representation
//!   with an interior-point solve and residual checks.
//! * [`bounds`] provides the convex surrogate bounds the iterative solvers
//!   linearize around, each tight at its expansion point.
//! * [`subproblems`] assembles the per-iteration convex programs.
//! * [`algorithms`] runs the successive-approximation drivers: efficiency
//!   maximization with soft antenna selection, sparsity-based selection,
//!   the efficiency/sum-rate trade-off scalarization, and baselines.
//! * [`oracle`] supplies brute-force references and bound audits for tests.

pub mod algorithms;
pub mod bounds;
pub mod conic;
pub mod model;
pub mod oracle;
pub mod subproblems;

/// Library version, exposed so harnesses can record it in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
