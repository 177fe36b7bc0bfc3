//! Photodetection of a quantum system through a strongly decohered two-level
//! output mode, computed three independent ways:
//!
//! * exact evolution under the full Liouville superoperator ([`liouville`]),
//! * quantum-jump trajectories of the adiabatically reduced model
//!   ([`trajectories`]),
//! * decoherence functionals over output-mode projection histories
//!   ([`histories`]),
//!
//! plus the [`analysis`] routines that check these against each other.
//!
//! Units have ħ = 1. Composite spaces are ordered `system ⊗ mode` with the
//! mode index fastest (see [`hilbert`]).

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod histories;
pub mod liouville;
pub mod model;
pub mod trajectories;

pub use error::{Error, Result};
pub use hilbert::{
    block_compose, block_decompose, matrix_exponential, trace_distance, BlockState, CMatrix, DensityMatrix,
    Operator, StateVector, C64,
};
pub use histories::{Convention, DecoherenceMatrix, History};
pub use liouville::Superoperator;
pub use model::{H0Spec, LindbladModel, ModelParams, ReducedModel};
pub use trajectories::TrajectoryRecord;
