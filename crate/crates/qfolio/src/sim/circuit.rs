//! Circuits with named parameter slots and the layered variational ansatz.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::{Gate, Param};
use super::noise::{run_trajectory, NoiseModel};
use super::state::StateVector;
use super::SimError;

/// Entangling gate used between adjacent qubits in each ansatz layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    Ecr,
    /// Local-simulation default: ECR replaced by plain CX.
    #[default]
    Cx,
}

/// Ordered gate list over `n` qubits with named parameter slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    slot_names: Vec<String>,
    slot_values: Vec<Option<f64>>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit {
            n,
            gates: Vec::new(),
            slot_names: Vec::new(),
            slot_values: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), SimError> {
        gate.validate(self.n)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn new_slot(&mut self, name: impl Into<String>) -> Param {
        self.slot_names.push(name.into());
        self.slot_values.push(None);
        Param::Slot(self.slot_names.len() - 1)
    }

    pub fn param_count(&self) -> usize {
        self.slot_names.len()
    }

    pub fn slot_name(&self, idx: usize) -> &str {
        &self.slot_names[idx]
    }

    /// Bind all slots at once, in slot-creation order.
    pub fn bind_all(&mut self, values: &[f64]) -> Result<(), SimError> {
        if values.len() != self.slot_values.len() {
            return Err(SimError::ParamLengthMismatch {
                got: values.len(),
                expected: self.slot_values.len(),
            });
        }
        for (slot, &v) in self.slot_values.iter_mut().zip(values) {
            *slot = Some(v);
        }
        Ok(())
    }

    pub fn resolve(&self, p: Param) -> Result<f64, SimError> {
        match p {
            Param::Fixed(v) => Ok(v),
            Param::Slot(i) => self.slot_values[i]
                .ok_or_else(|| SimError::UnboundParameter(self.slot_names[i].clone())),
        }
    }

    /// Noiseless execution on a copy of `initial`.
    pub fn run(&self, initial: &StateVector) -> Result<StateVector, SimError> {
        run_trajectory(self, &NoiseModel::none(), initial, 0)
    }

    /// Dense matrix of the circuit (column `k` = circuit applied to `|k>`),
    /// for oracle checks and compilation costs. Intended for small `n`.
    pub fn unitary(&self) -> Result<DMatrix<Complex64>, SimError> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let col = self.run(&StateVector::basis(self.n, k as u64))?;
            for (r, a) in col.amplitudes().iter().enumerate() {
                m[(r, k)] = *a;
            }
        }
        Ok(m)
    }
}

/// Layered hardware-efficient ansatz: each layer applies one `U3` per qubit
/// (three fresh parameter slots each) followed by entanglers on adjacent
/// pairs `(0,1), (1,2), ..., (n-2, n-1)`. Total parameter count `3 n L`.
pub fn build_layered_ansatz(n: usize, layers: usize, entangler: Entangler) -> Circuit {
    assert!(layers >= 1, "ansatz needs at least one layer");
    let mut c = Circuit::new(n);
    for layer in 0..layers {
        for q in 0..n {
            let theta = c.new_slot(format!("l{layer}_q{q}_theta"));
            let phi = c.new_slot(format!("l{layer}_q{q}_phi"));
            let lambda = c.new_slot(format!("l{layer}_q{q}_lambda"));
            c.push(Gate::U3 {
                qubit: q,
                theta,
                phi,
                lambda,
            })
            .expect("qubit in range");
        }
        for q in 0..n.saturating_sub(1) {
            let gate = match entangler {
                Entangler::Ecr => Gate::Ecr { a: q, b: q + 1 },
                Entangler::Cx => Gate::Cx {
                    control: q,
                    target: q + 1,
                },
            };
            c.push(gate).expect("qubit in range");
        }
    }
    c
}
