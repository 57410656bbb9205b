//! Dense statevector simulator: gate set (U3, X, H, S-dagger, CX, ECR),
//! layered variational ansatz construction, measurement sampling, diagonal
//! expectation values, and stochastic two-qubit-gate noise.
//!
//! Conventions: qubit 0 is the least significant bit of an amplitude index.
//! Trajectory execution always compiles ECR gates down to the CX fragment
//! of [`gate::ecr_decomposition`], so noise attaches to every physical CX;
//! the dense ECR matrix (used directly by [`state::StateVector::apply_gate`])
//! differs from the fragment by an unobservable global phase of `e^{-i pi/4}`.

mod circuit;
mod gate;
mod noise;
mod state;

pub use circuit::{build_layered_ansatz, Circuit, Entangler};
pub use gate::{ecr_decomposition, ecr_matrix, u3_matrix, Gate, Param};
pub use noise::{run_trajectory, NoiseKind, NoiseModel};
pub use state::{diagonal_expectation, expectation_from_table, Histogram, StateVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("parameter slot '{0}' is unbound")]
    UnboundParameter(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLengthMismatch { got: usize, expected: usize },
    #[error("state dimension mismatch: state has {state_qubits} qubits, operator expects {expected}")]
    DimensionMismatch { state_qubits: usize, expected: usize },
    #[error("shots must be at least 1")]
    NoShots,
}
