//! Finite-volume laboratory for the one-dimensional Euler-alignment system on
//! the torus `[-π, π)`: communication kernels, an SSP-RK3/WENO solver, entropy
//! diagnostics and the explicit long-time flocking bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod oracle;
pub mod solver;
pub mod special;

pub use bounds::{BoundReport, CheckSummary, InitialSummary, LogisticEnvelope};
pub use diagnostics::{DiagnosticsRecord, PoincareConstant};
pub use error::{Error, Result};
pub use grid::{DensitySpec, Field, FlockState, TorusGrid};
pub use kernels::{KernelNorms, KernelSpec, KernelWeights, LipschitzProfile};
pub use solver::{Solver, SolverConfig, Trajectory};
