//! Synthetic asset-price generation and the Markowitz model quantities:
//! budget-scaled expected returns, covariance, and the portfolio objective
//! `F(z)` with its soft budget penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("theta components must be non-negative and sum to 1 (got {0:?})")]
    InvalidTheta([f64; 3]),
    #[error("price history too short: need at least 2 points, got {0}")]
    InsufficientHistory(usize),
    #[error("allocation vector has length {got}, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("allocation z[{index}] = {value} out of range [0, {max}]")]
    AllocationOutOfRange { index: usize, value: u64, max: u64 },
}

/// A generated portfolio problem: price history plus investor preferences.
///
/// Prices form an `m x N_f` matrix, one row per asset. `theta` weights the
/// return, risk, and budget-deviation terms of the objective and must sum
/// to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortfolioInstance {
    /// Number of assets `m`.
    pub asset_count: usize,
    /// Binary slices per asset `w`; allocations are multiples of `2^(1-w)`.
    pub slices_per_asset: usize,
    /// Number of price history points `N_f`.
    pub history_len: usize,
    /// Total budget `b` in currency units.
    pub budget: f64,
    /// Price matrix, shape `(m, N_f)`.
    pub prices: Vec<Vec<f64>>,
    /// Preference weights `(theta1, theta2, theta3)`.
    pub theta: [f64; 3],
    pub seed: u64,
    pub instance_id: u64,
}

/// Derived financial quantities of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinancialSummary {
    /// Budget-scaled expected return per asset, length `m`.
    pub expected_return: Vec<f64>,
    /// Budget-scaled sample covariance, `m x m`, symmetric.
    pub covariance: Vec<Vec<f64>>,
    /// Quantized minimum investment fraction `p_w = 2^(1-w)`.
    pub quantized_fraction: f64,
}

fn validate_theta(theta: [f64; 3]) -> Result<(), PortfolioError> {
    let sum: f64 = theta.iter().sum();
    if theta.iter().any(|&t| t < 0.0) || (sum - 1.0).abs() > 1e-12 {
        return Err(PortfolioError::InvalidTheta(theta));
    }
    Ok(())
}

/// Generate a random instance. Base prices are uniform in `[b/10, b]`;
/// every history point is an independent fluctuation of up to +/-25% around
/// the asset's base price. Deterministic for a given seed.
pub fn generate_instance(
    asset_count: usize,
    slices_per_asset: usize,
    history_len: usize,
    budget: f64,
    theta: [f64; 3],
    seed: u64,
    instance_id: u64,
) -> Result<PortfolioInstance, PortfolioError> {
    if asset_count < 1 || slices_per_asset < 1 || history_len < 1 {
        return Err(PortfolioError::InvalidParameter(
            "m, w and N_f must all be at least 1".into(),
        ));
    }
    if budget <= 0.0 {
        return Err(PortfolioError::InvalidParameter(format!(
            "budget must be positive, got {budget}"
        )));
    }
    validate_theta(theta)?;

    let mut rng = rng::rng_from(rng::mix(seed, instance_id));
    let mut prices = Vec::with_capacity(asset_count);
    for _ in 0..asset_count {
        let base: f64 = rng.gen_range(budget / 10.0..=budget);
        let row: Vec<f64> = (0..history_len)
            .map(|_| {
                let alpha: f64 = rng.gen_range(-0.25..=0.25);
                (1.0 + alpha) * base
            })
            .collect();
        prices.push(row);
    }

    Ok(PortfolioInstance {
        asset_count,
        slices_per_asset,
        history_len,
        budget,
        prices,
        theta,
        seed,
        instance_id,
    })
}

/// Compute expected returns and the covariance matrix.
///
/// `r_u` sums the `N_f - 1` consecutive price differences of asset `u`,
/// rescaled by `b * p_w / a_{u,last}`; `c_{u,v}` is the sample covariance
/// of the two price histories rescaled by `b^2 p_w^2 / (a_{u,last} a_{v,last})`.
pub fn summarize(instance: &PortfolioInstance) -> Result<FinancialSummary, PortfolioError> {
    let n_f = instance.history_len;
    if n_f < 2 {
        return Err(PortfolioError::InsufficientHistory(n_f));
    }
    let m = instance.asset_count;
    let b = instance.budget;
    let p_w = quantized_fraction(instance.slices_per_asset);
    let div = (n_f - 1) as f64;

    let last: Vec<f64> = instance.prices.iter().map(|row| row[n_f - 1]).collect();
    let mean: Vec<f64> = instance
        .prices
        .iter()
        .map(|row| row.iter().sum::<f64>() / n_f as f64)
        .collect();

    let expected_return: Vec<f64> = (0..m)
        .map(|u| {
            let diffs: f64 = (0..n_f - 1)
                .map(|l| instance.prices[u][l + 1] - instance.prices[u][l])
                .sum();
            b * p_w / last[u] * diffs / div
        })
        .collect();

    let mut covariance = vec![vec![0.0; m]; m];
    for u in 0..m {
        for v in u..m {
            let s: f64 = (0..n_f)
                .map(|l| (instance.prices[u][l] - mean[u]) * (instance.prices[v][l] - mean[v]))
                .sum();
            let c = b * b * p_w * p_w / (last[u] * last[v]) * s / div;
            covariance[u][v] = c;
            covariance[v][u] = c;
        }
    }

    Ok(FinancialSummary {
        expected_return,
        covariance,
        quantized_fraction: p_w,
    })
}

pub fn quantized_fraction(slices_per_asset: usize) -> f64 {
    2f64.powi(1 - slices_per_asset as i32)
}

/// The portfolio objective
/// `F(z) = theta1 sum_u r_u z_u - theta2 sum_uv c_uv z_u z_v - theta3 (sum_u z_u p_w b - b)^2`,
/// with the sum over assets inside the budget-penalty square.
pub fn objective(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
    z: &[u64],
) -> Result<f64, PortfolioError> {
    let m = instance.asset_count;
    if z.len() != m {
        return Err(PortfolioError::ShapeMismatch {
            got: z.len(),
            expected: m,
        });
    }
    let max_z = (1u64 << instance.slices_per_asset) - 1;
    if let Some((i, &v)) = z.iter().enumerate().find(|(_, &v)| v > max_z) {
        return Err(PortfolioError::AllocationOutOfRange {
            index: i,
            value: v,
            max: max_z,
        });
    }
    let [t1, t2, t3] = instance.theta;
    let b = instance.budget;
    let p_w = summary.quantized_fraction;

    let ret: f64 = (0..m).map(|u| summary.expected_return[u] * z[u] as f64).sum();
    let mut risk = 0.0;
    for u in 0..m {
        for v in 0..m {
            risk += summary.covariance[u][v] * z[u] as f64 * z[v] as f64;
        }
    }
    let invested: f64 = z.iter().map(|&zu| zu as f64 * p_w * b).sum();
    Ok(t1 * ret - t2 * risk - t3 * (invested - b) * (invested - b))
}
