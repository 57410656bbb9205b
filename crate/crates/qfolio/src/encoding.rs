//! Binary encoding of allocations, QUBO coefficients, the Ising Hamiltonian,
//! and exact ground states by enumeration.
//!
//! Qubit `i` (0-based) carries bit `k = i % w` of asset `u = i / w`, with
//! weight `2^k`. Qubit 0 is the least significant bit of a basis-state
//! index, so basis index `x` has bit `i` equal to `(x >> i) & 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::portfolio::{self, FinancialSummary, PortfolioInstance};

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("allocation z[{index}] = {value} exceeds 2^w - 1 = {max}")]
    OutOfRange { index: usize, value: u64, max: u64 },
    #[error("bitstring length {got} does not match qubit count {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("enumeration limited to {max} qubits, got {got}")]
    TooLarge { got: usize, max: usize },
}

/// Maximum qubit count accepted by [`brute_force_ground`].
pub const ENUMERATION_LIMIT: usize = 24;

/// A computational-basis bitstring in canonical qubit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bitstring(pub Vec<u8>);

/// Rendering order for bitstring display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitOrder {
    /// Qubit 0 first (leftmost), matching the canonical index order.
    #[default]
    Canonical,
    /// Qubit n-1 first (little-endian hardware rendering).
    Reversed,
}

impl Bitstring {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bitstring of `n` qubits for a basis-state index.
    pub fn from_index(index: u64, n: usize) -> Self {
        Bitstring((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    /// Basis-state index with qubit 0 as the least significant bit.
    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn render(&self, order: BitOrder) -> String {
        let iter: Box<dyn Iterator<Item = &u8>> = match order {
            BitOrder::Canonical => Box::new(self.0.iter()),
            BitOrder::Reversed => Box::new(self.0.iter().rev()),
        };
        iter.map(|b| if *b == 0 { '0' } else { '1' }).collect()
    }

    pub fn parse(s: &str, order: BitOrder) -> Option<Self> {
        let mut bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect::<Option<_>>()?;
        if order == BitOrder::Reversed {
            bits.reverse();
        }
        Some(Bitstring(bits))
    }
}

/// QUBO coefficients: minimize `sum_i q_i x_i + sum_ij Q_ij x_i x_j + gamma`.
///
/// `Q` is stored exactly as constructed (diagonal included, not
/// symmetrized) and evaluated over all ordered index pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuboModel {
    pub n: usize,
    pub q: Vec<f64>,
    #[serde(rename = "Q")]
    pub qq: Vec<Vec<f64>>,
    pub gamma: f64,
}

/// Exact ground state found by enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundState {
    pub energy: f64,
    pub bitstring: Bitstring,
}

/// Diagonal Ising Hamiltonian `H = sum_i h_i s_i + sum_ij J_ij s_i s_j + delta`
/// with spins `s_i = 2 x_i - 1`. The double sum runs over all ordered pairs,
/// including `i = j` (where `s_i s_i = 1`), mirroring the QUBO convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsingModel {
    pub n: usize,
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    pub delta: f64,
    /// Filled by [`brute_force_ground`]; `None` until solved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundState>,
}

/// Binary-encode an allocation vector, bit `k` of `z_u` at qubit `u*w + k`.
pub fn encode_z(z: &[u64], w: usize) -> Result<Bitstring, EncodingError> {
    let max = (1u64 << w) - 1;
    let mut bits = Vec::with_capacity(z.len() * w);
    for (u, &zu) in z.iter().enumerate() {
        if zu > max {
            return Err(EncodingError::OutOfRange {
                index: u,
                value: zu,
                max,
            });
        }
        for k in 0..w {
            bits.push(((zu >> k) & 1) as u8);
        }
    }
    Ok(Bitstring(bits))
}

/// Decode a bitstring back into the allocation vector.
pub fn decode_z(bits: &Bitstring, m: usize, w: usize) -> Result<Vec<u64>, EncodingError> {
    if bits.len() != m * w {
        return Err(EncodingError::LengthMismatch {
            got: bits.len(),
            expected: m * w,
        });
    }
    Ok((0..m)
        .map(|u| {
            (0..w)
                .map(|k| (bits.0[u * w + k] as u64) << k)
                .sum::<u64>()
        })
        .collect())
}

/// Build QUBO coefficients such that `qubo_value(x) = -F(z(x))` exactly.
pub fn build_qubo(instance: &PortfolioInstance, summary: &FinancialSummary) -> QuboModel {
    let m = instance.asset_count;
    let w = instance.slices_per_asset;
    let n = m * w;
    let [t1, t2, t3] = instance.theta;
    let b = instance.budget;
    let p_w = summary.quantized_fraction;

    let weight = |i: usize| 2f64.powi((i % w) as i32); // 2^(k-1), k 1-based
    let asset = |i: usize| i / w;

    let mut q = vec![0.0; n];
    let mut qq = vec![vec![0.0; n]; n];
    for i in 0..n {
        let r_i = weight(i) * summary.expected_return[asset(i)];
        q[i] = -t1 * r_i - 2.0 * t3 * b * b * p_w * weight(i);
        for j in 0..n {
            let c_ij = weight(i) * weight(j) * summary.covariance[asset(i)][asset(j)];
            qq[i][j] = t2 * c_ij + t3 * b * b * p_w * p_w * weight(i) * weight(j);
        }
    }

    QuboModel {
        n,
        q,
        qq,
        gamma: t3 * b * b,
    }
}

/// Evaluate the QUBO objective on a bitstring.
pub fn qubo_value(model: &QuboModel, bits: &Bitstring) -> Result<f64, EncodingError> {
    if bits.len() != model.n {
        return Err(EncodingError::LengthMismatch {
            got: bits.len(),
            expected: model.n,
        });
    }
    let x = &bits.0;
    let mut v = model.gamma;
    for i in 0..model.n {
        if x[i] == 0 {
            continue;
        }
        v += model.q[i];
        for j in 0..model.n {
            if x[j] != 0 {
                v += model.qq[i][j];
            }
        }
    }
    Ok(v)
}

/// Convert QUBO to the equivalent Ising Hamiltonian via `x_i = (1 + s_i)/2`.
pub fn build_ising(qubo: &QuboModel) -> IsingModel {
    let n = qubo.n;
    let j: Vec<Vec<f64>> = qubo
        .qq
        .iter()
        .map(|row| row.iter().map(|&v| v / 4.0).collect())
        .collect();
    // h_i = q_i/2 + (1/4)(row_i + col_i); equals q_i/2 + (1/2) sum_j Q_ij
    // for symmetric Q but stays exact for any Q.
    let h: Vec<f64> = (0..n)
        .map(|i| {
            let row: f64 = qubo.qq[i].iter().sum();
            let col: f64 = (0..n).map(|jj| qubo.qq[jj][i]).sum();
            qubo.q[i] / 2.0 + (row + col) / 4.0
        })
        .collect();
    let sum_qq: f64 = qubo.qq.iter().flatten().sum();
    let sum_q: f64 = qubo.q.iter().sum();
    let delta = sum_qq / 4.0 + sum_q / 2.0 + qubo.gamma;
    IsingModel {
        n,
        h,
        j,
        delta,
        ground: None,
    }
}

impl IsingModel {
    /// Energy of a computational basis state given as an index.
    pub fn energy_of_index(&self, index: u64) -> f64 {
        let spin = |i: usize| if (index >> i) & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = self.delta;
        for i in 0..self.n {
            let si = spin(i);
            e += self.h[i] * si;
            for jj in 0..self.n {
                e += self.j[i][jj] * si * spin(jj);
            }
        }
        e
    }

    /// Energies of all `2^n` basis states, indexed by basis-state index.
    pub fn energy_table(&self) -> Vec<f64> {
        (0..1u64 << self.n).map(|x| self.energy_of_index(x)).collect()
    }

    /// Spectral gap `E_1 - E_0` from full enumeration.
    pub fn spectral_gap(&self) -> f64 {
        let mut energies = self.energy_table();
        energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        energies[1] - energies[0]
    }
}

/// Ising energy of a bitstring.
pub fn ising_energy(model: &IsingModel, bits: &Bitstring) -> Result<f64, EncodingError> {
    if bits.len() != model.n {
        return Err(EncodingError::LengthMismatch {
            got: bits.len(),
            expected: model.n,
        });
    }
    Ok(model.energy_of_index(bits.to_index()))
}

/// Exact minimum energy and its bitstring by full enumeration.
/// Ties break toward the lexicographically smallest bitstring in canonical
/// order, so results are reproducible.
pub fn brute_force_ground(model: &IsingModel) -> Result<GroundState, EncodingError> {
    if model.n > ENUMERATION_LIMIT {
        return Err(EncodingError::TooLarge {
            got: model.n,
            max: ENUMERATION_LIMIT,
        });
    }
    let mut best_energy = f64::INFINITY;
    let mut best = Bitstring(vec![0; model.n]);
    for x in 0..1u64 << model.n {
        let e = model.energy_of_index(x);
        if e < best_energy - 1e-15 {
            best_energy = e;
            best = Bitstring::from_index(x, model.n);
        } else if (e - best_energy).abs() <= 1e-15 {
            let cand = Bitstring::from_index(x, model.n);
            if cand.0 < best.0 {
                best = cand;
            }
        }
    }
    Ok(GroundState {
        energy: best_energy,
        bitstring: best,
    })
}

/// Convenience: full chain from an instance to a solved Ising model.
pub fn ising_from_instance(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
) -> Result<IsingModel, EncodingError> {
    let qubo = build_qubo(instance, summary);
    let mut ising = build_ising(&qubo);
    ising.ground = Some(brute_force_ground(&ising)?);
    Ok(ising)
}

/// Maximum of the portfolio objective over all allocations, by enumeration.
pub fn max_objective(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
) -> (f64, Bitstring) {
    let n = instance.asset_count * instance.slices_per_asset;
    let mut best = f64::NEG_INFINITY;
    let mut best_bits = Bitstring(vec![0; n]);
    for x in 0..1u64 << n {
        let bits = Bitstring::from_index(x, n);
        let z = decode_z(&bits, instance.asset_count, instance.slices_per_asset).unwrap();
        let f = portfolio::objective(instance, summary, &z).unwrap();
        if f > best + 1e-15 {
            best = f;
            best_bits = bits;
        } else if (f - best).abs() <= 1e-15 && bits.0 < best_bits.0 {
            best_bits = bits;
        }
    }
    (best, best_bits)
}
