//! Stochastic two-qubit-gate noise and trajectory execution.
//!
//! Noise attaches to CX gates only: `CxXFlip` applies an X to the target
//! qubit after each CX with probability `p`; `CxDepolarizing` applies one of
//! the fifteen non-identity two-qubit Paulis, chosen uniformly, with
//! probability `p`. ECR gates are decomposed into their CX fragment before
//! execution, so each ECR carries two noise opportunities.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::circuit::Circuit;
use super::gate::{self, Gate};
use super::state::StateVector;
use super::SimError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    CxXFlip,
    CxDepolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub error_rate: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            error_rate: 0.0,
        }
    }

    pub fn new(kind: NoiseKind, error_rate: f64) -> Self {
        assert!((0.0..=1.0).contains(&error_rate), "error rate in [0,1]");
        NoiseModel { kind, error_rate }
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self.kind, NoiseKind::None) || self.error_rate == 0.0
    }
}

fn y_matrix() -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    [[z, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), z]]
}

fn z_matrix() -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(1.0, 0.0), z], [z, Complex64::new(-1.0, 0.0)]]
}

fn apply_pauli(state: &mut StateVector, qubit: usize, which: usize) {
    match which {
        0 => {}
        1 => state.apply_single(qubit, &gate::x_matrix()),
        2 => state.apply_single(qubit, &y_matrix()),
        3 => state.apply_single(qubit, &z_matrix()),
        _ => unreachable!(),
    }
}

/// Run one stochastic trajectory of the circuit. Deterministic given
/// `seed`; with a noiseless model the RNG is never consulted, so any seed
/// reproduces the ideal evolution.
pub fn run_trajectory(
    circuit: &Circuit,
    noise: &NoiseModel,
    initial: &StateVector,
    seed: u64,
) -> Result<StateVector, SimError> {
    if initial.qubits() != circuit.n {
        return Err(SimError::DimensionMismatch {
            state_qubits: initial.qubits(),
            expected: circuit.n,
        });
    }
    let mut state = initial.clone();
    let mut rng = rng::rng_from(seed);
    let resolve = |p| circuit.resolve(p);

    for g in &circuit.gates {
        match g {
            Gate::Ecr { a, b } => {
                for frag in gate::ecr_decomposition(*a, *b) {
                    apply_with_noise(&mut state, &frag, noise, &mut rng, &resolve)?;
                }
            }
            other => apply_with_noise(&mut state, other, noise, &mut rng, &resolve)?,
        }
    }
    Ok(state)
}

fn apply_with_noise(
    state: &mut StateVector,
    g: &Gate,
    noise: &NoiseModel,
    rng: &mut rand_chacha::ChaCha8Rng,
    resolve: &dyn Fn(gate::Param) -> Result<f64, SimError>,
) -> Result<(), SimError> {
    state.apply_gate(g, resolve)?;
    if let Gate::Cx { control, target } = *g {
        match noise.kind {
            NoiseKind::None => {}
            NoiseKind::CxXFlip => {
                if noise.error_rate > 0.0 && rng.gen::<f64>() < noise.error_rate {
                    state.apply_single(target, &gate::x_matrix());
                }
            }
            NoiseKind::CxDepolarizing => {
                if noise.error_rate > 0.0 && rng.gen::<f64>() < noise.error_rate {
                    // index 1..=15 over pairs (p_control, p_target) != (I, I)
                    let which = rng.gen_range(1usize..16);
                    apply_pauli(state, control, which / 4);
                    apply_pauli(state, target, which % 4);
                }
            }
        }
    }
    Ok(())
}
