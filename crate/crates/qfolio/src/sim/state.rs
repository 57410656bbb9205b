//! Dense statevector and measurement sampling.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gate::{self, Gate, Param};
use super::SimError;
use crate::encoding::{BitOrder, Bitstring, IsingModel};

/// `2^n` complex amplitudes; qubit 0 is the least significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|00...0>`.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    /// A computational basis state.
    pub fn basis(n: usize, index: u64) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index as usize] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    /// Uniform superposition over all basis states.
    pub fn uniform(n: usize) -> Self {
        let amp = Complex64::new(1.0 / ((1u64 << n) as f64).sqrt(), 0.0);
        StateVector {
            n,
            amps: vec![amp; 1 << n],
        }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Self {
        assert_eq!(amps.len(), 1 << n);
        StateVector { n, amps }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for a in &mut self.amps {
                *a /= norm;
            }
        }
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        let ip: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        ip.norm_sqr()
    }

    pub fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) {
        let stride = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += stride << 1;
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
    }

    /// Apply a two-qubit matrix; `m` is indexed by `2*bit(q_hi) + bit(q_lo)`.
    pub fn apply_two(&mut self, q_hi: usize, q_lo: usize, m: &[[Complex64; 4]; 4]) {
        let hbit = 1usize << q_hi;
        let lbit = 1usize << q_lo;
        for i in 0..self.amps.len() {
            if i & hbit != 0 || i & lbit != 0 {
                continue;
            }
            let idx = [i, i | lbit, i | hbit, i | hbit | lbit];
            let input: Vec<Complex64> = idx.iter().map(|&k| self.amps[k]).collect();
            for r in 0..4 {
                self.amps[idx[r]] = (0..4).map(|c| m[r][c] * input[c]).sum();
            }
        }
    }

    /// Apply a single gate with already-resolved parameters.
    /// `Ecr` applies the dense matrix; trajectory execution decomposes it
    /// instead (the two differ by a global phase only).
    pub fn apply_gate(&mut self, g: &Gate, resolve: &dyn Fn(Param) -> Result<f64, SimError>) -> Result<(), SimError> {
        g.validate(self.n)?;
        match *g {
            Gate::U3 {
                qubit,
                theta,
                phi,
                lambda,
            } => {
                let m = gate::u3_matrix(resolve(theta)?, resolve(phi)?, resolve(lambda)?);
                self.apply_single(qubit, &m);
            }
            Gate::X { qubit } => self.apply_single(qubit, &gate::x_matrix()),
            Gate::H { qubit } => self.apply_single(qubit, &gate::h_matrix()),
            Gate::Sdg { qubit } => self.apply_single(qubit, &gate::sdg_matrix()),
            Gate::Cx { control, target } => self.apply_cx(control, target),
            Gate::Ecr { a, b } => self.apply_two(a, b, &gate::ecr_matrix()),
        }
        Ok(())
    }

    /// Multinomial measurement sample; deterministic given the RNG state.
    pub fn sample(&self, shots: usize, rng: &mut ChaCha8Rng) -> Result<Histogram, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        let probs = self.probabilities();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..shots {
            let r: f64 = rng.gen_range(0.0..total);
            let idx = cdf.partition_point(|&c| c <= r).min(probs.len() - 1);
            *counts.entry(idx as u64).or_insert(0) += 1;
        }
        Ok(Histogram {
            n: self.n,
            counts,
        })
    }
}

/// Measured bitstring counts, keyed by basis-state index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub n: usize,
    pub counts: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn empty(n: usize) -> Self {
        Histogram {
            n,
            counts: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn add(&mut self, index: u64, count: u64) {
        *self.counts.entry(index).or_insert(0) += count;
    }

    /// Most frequent outcome; ties break toward the smallest index.
    pub fn mode(&self) -> Option<Bitstring> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&idx, _)| Bitstring::from_index(idx, self.n))
    }

    pub fn frequency(&self, index: u64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        *self.counts.get(&index).unwrap_or(&0) as f64 / total as f64
    }

    /// Counts keyed by rendered bitstrings, for serialization.
    pub fn rendered(&self, order: BitOrder) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&idx, &c)| (Bitstring::from_index(idx, self.n).render(order), c))
            .collect()
    }
}

/// Exact `<psi|H|psi>` for the diagonal Ising Hamiltonian.
pub fn diagonal_expectation(model: &IsingModel, state: &StateVector) -> Result<f64, SimError> {
    if model.n != state.qubits() {
        return Err(SimError::DimensionMismatch {
            state_qubits: state.qubits(),
            expected: model.n,
        });
    }
    Ok(state
        .amps
        .iter()
        .enumerate()
        .map(|(x, a)| a.norm_sqr() * model.energy_of_index(x as u64))
        .sum())
}

/// Same expectation against a precomputed energy table.
pub fn expectation_from_table(table: &[f64], state: &StateVector) -> f64 {
    state
        .amps
        .iter()
        .zip(table)
        .map(|(a, &e)| a.norm_sqr() * e)
        .sum()
}
