//! Comparison metrics across solvers: return errors against the enumerated
//! optimum, random-state baselines, noise sweeps, and instance-suite runs
//! emitted as CSV/JSON-ready report rows.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, Bitstring, IsingModel};
use crate::optimize::OptimizerConfig;
use crate::portfolio::{self, FinancialSummary, PortfolioInstance};
use crate::qaoa::{solve_qaoa, QaoaConfig};
use crate::qite::{
    apply_qite_exact, build_dilation, compile_qite_circuit, default_beta, run_qite_compiled,
};
use crate::rng;
use crate::sim::{Histogram, NoiseModel, StateVector};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("histogram covers {got} qubits, instance needs {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("Ising model has no precomputed ground state")]
    MissingGroundState,
}

/// How a measured distribution is collapsed into one return number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FMode {
    /// Histogram-weighted average of `F(z(x))`.
    Expectation,
    /// `F` of the most frequent bitstring.
    Argmax,
}

/// Return error `F_error = F_ideal - F_circuit` of a measured distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnMetrics {
    pub f_ideal: f64,
    pub f_circuit: f64,
    pub f_error: f64,
    pub mode: FMode,
}

/// Objective value for every basis state, indexed like the energy table.
pub fn objective_table(instance: &PortfolioInstance, summary: &FinancialSummary) -> Vec<f64> {
    let m = instance.asset_count;
    let w = instance.slices_per_asset;
    let n = m * w;
    (0..1u64 << n)
        .map(|x| {
            let z = encoding::decode_z(&Bitstring::from_index(x, n), m, w).unwrap();
            portfolio::objective(instance, summary, &z).unwrap()
        })
        .collect()
}

pub fn return_error(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
    histogram: &Histogram,
    mode: FMode,
) -> Result<ReturnMetrics, BenchError> {
    if histogram.is_empty() {
        return Err(BenchError::EmptyHistogram);
    }
    let n = instance.asset_count * instance.slices_per_asset;
    if histogram.n != n {
        return Err(BenchError::SizeMismatch {
            got: histogram.n,
            expected: n,
        });
    }
    let (f_ideal, _) = encoding::max_objective(instance, summary);
    let f_of = |x: u64| {
        let z = encoding::decode_z(&Bitstring::from_index(x, n), instance.asset_count, instance.slices_per_asset)
            .unwrap();
        portfolio::objective(instance, summary, &z).unwrap()
    };
    let f_circuit = match mode {
        FMode::Expectation => {
            let total = histogram.total() as f64;
            histogram
                .counts
                .iter()
                .map(|(&x, &c)| f_of(x) * c as f64)
                .sum::<f64>()
                / total
        }
        FMode::Argmax => f_of(histogram.mode().unwrap().to_index()),
    };
    Ok(ReturnMetrics {
        f_ideal,
        f_circuit,
        f_error: f_ideal - f_circuit,
        mode,
    })
}

/// Expectation-mode return error of an exact probability vector.
pub fn expectation_return_error(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
    probabilities: &[f64],
) -> ReturnMetrics {
    let table = objective_table(instance, summary);
    assert_eq!(probabilities.len(), table.len());
    let (f_ideal, _) = encoding::max_objective(instance, summary);
    let f_circuit: f64 = probabilities
        .iter()
        .zip(&table)
        .map(|(p, f)| p * f)
        .sum();
    ReturnMetrics {
        f_ideal,
        f_circuit,
        f_error: f_ideal - f_circuit,
        mode: FMode::Expectation,
    }
}

/// Mean and sample standard deviation of baseline return errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineStats {
    pub mean: f64,
    pub std_dev: f64,
    pub samples: Vec<ReturnMetrics>,
}

/// Random-state baseline: amplitudes `a_i ~ Uniform[0,1]`, normalized, exact
/// probabilities, expectation-mode return error per sample.
pub fn random_state_baseline(
    instance: &PortfolioInstance,
    summary: &FinancialSummary,
    samples: usize,
    seed: u64,
) -> BaselineStats {
    assert!(samples >= 1, "need at least one sample");
    let n = instance.asset_count * instance.slices_per_asset;
    let dim = 1usize << n;
    let mut r = rng::rng_from(rng::mix(seed, 0xBA5E));
    let metrics: Vec<ReturnMetrics> = (0..samples)
        .map(|_| {
            let amps: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..1.0)).collect();
            let norm: f64 = amps.iter().map(|a| a * a).sum();
            let probs: Vec<f64> = amps.iter().map(|a| a * a / norm).collect();
            expectation_return_error(instance, summary, &probs)
        })
        .collect();
    let mean = metrics.iter().map(|m| m.f_error).sum::<f64>() / samples as f64;
    let var = if samples > 1 {
        metrics
            .iter()
            .map(|m| (m.f_error - mean).powi(2))
            .sum::<f64>()
            / (samples - 1) as f64
    } else {
        0.0
    };
    BaselineStats {
        mean,
        std_dev: var.sqrt(),
        samples: metrics,
    }
}

/// Which pipeline a benchmark row exercises.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "solver")]
pub enum SolverSpec {
    Qaoa(QaoaConfig),
    QiteExact {
        /// `None` resolves the gap-adaptive default.
        beta: Option<f64>,
        shots: usize,
    },
    QiteCompiled {
        beta: Option<f64>,
        layers: usize,
        shots: usize,
        optimizer: OptimizerConfig,
        /// Convergence threshold for the compile cost.
        threshold: f64,
    },
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::Qaoa(_) => "qaoa",
            SolverSpec::QiteExact { .. } => "qite",
            SolverSpec::QiteCompiled { .. } => "qite",
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            SolverSpec::Qaoa(c) => match c.mode {
                crate::qaoa::EvalMode::Exact => "exact",
                crate::qaoa::EvalMode::Sampled { .. } => "sampled",
            },
            SolverSpec::QiteExact { .. } => "exact",
            SolverSpec::QiteCompiled { .. } => "compiled",
        }
    }
}

/// One benchmark cell; failed cells carry `error` and empty metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance_id: u64,
    pub solver: String,
    pub mode: String,
    pub p: f64,
    pub seed: u64,
    pub min_energy_deviation: Option<f64>,
    pub f_error_expectation: Option<f64>,
    pub f_error_argmax: Option<f64>,
    pub success_probability: Option<f64>,
    pub matched_optimum: Option<bool>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance_id,solver,mode,p,seed,min_energy_deviation,f_error_expectation,f_error_argmax,success_probability,matched_optimum,wall_time_s\n",
        );
        let opt = |v: &Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.instance_id,
                r.solver,
                r.mode,
                r.p,
                r.seed,
                opt(&r.min_energy_deviation),
                opt(&r.f_error_expectation),
                opt(&r.f_error_argmax),
                opt(&r.success_probability),
                r.matched_optimum.map(|b| b.to_string()).unwrap_or_default(),
                r.wall_time_s,
            ));
        }
        out
    }

    /// Mean of a column per noise level, in ascending `p` order.
    pub fn mean_by_p(&self, value: impl Fn(&BenchRow) -> Option<f64>) -> Vec<(f64, f64)> {
        let mut ps: Vec<f64> = self.rows.iter().map(|r| r.p).collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ps.dedup();
        ps.into_iter()
            .map(|p| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.p == p)
                    .filter_map(&value)
                    .collect();
                (p, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
            })
            .collect()
    }
}

/// Everything a solver run needs about one problem instance.
pub struct BenchCase<'a> {
    pub instance: &'a PortfolioInstance,
    pub summary: &'a FinancialSummary,
    pub ising: &'a IsingModel,
}

/// Execute one solver on one instance under one noise model.
pub fn run_solver(
    case: &BenchCase,
    spec: &SolverSpec,
    noise: &NoiseModel,
    seed: u64,
) -> BenchRow {
    let start = Instant::now();
    let ground = case.ising.ground.as_ref();
    let mut row = BenchRow {
        instance_id: case.instance.instance_id,
        solver: spec.name().to_string(),
        mode: spec.mode_name().to_string(),
        p: if noise.is_noiseless() { 0.0 } else { noise.error_rate },
        seed,
        min_energy_deviation: None,
        f_error_expectation: None,
        f_error_argmax: None,
        success_probability: None,
        matched_optimum: None,
        wall_time_s: 0.0,
        error: None,
        histogram: None,
    };

    let outcome: Result<(Histogram, f64, Option<f64>), String> = (|| {
        let ground = ground.ok_or_else(|| BenchError::MissingGroundState.to_string())?;
        match spec {
            SolverSpec::Qaoa(config) => {
                let mut config = config.clone();
                config.noise = *noise;
                config.optimizer.seed = rng::derive(seed, 0xA, case.instance.instance_id);
                let res = solve_qaoa(case.ising, &config, seed).map_err(|e| e.to_string())?;
                Ok((res.histogram, res.min_energy_deviation, None))
            }
            SolverSpec::QiteExact { beta, shots } => {
                let beta = beta.unwrap_or_else(|| default_beta(case.ising));
                let dil = build_dilation(case.ising, beta).map_err(|e| e.to_string())?;
                let res =
                    apply_qite_exact(&dil, &StateVector::uniform(case.ising.n), *shots, seed)
                        .map_err(|e| e.to_string())?;
                Ok((
                    res.histogram,
                    (ground.energy - res.energy).abs(),
                    Some(res.success_probability),
                ))
            }
            SolverSpec::QiteCompiled {
                beta,
                layers,
                shots,
                optimizer,
                threshold,
            } => {
                let beta = beta.unwrap_or_else(|| default_beta(case.ising));
                let dil = build_dilation(case.ising, beta).map_err(|e| e.to_string())?;
                let mut optimizer = optimizer.clone();
                optimizer.seed = rng::derive(seed, 0xC, case.instance.instance_id);
                let out = compile_qite_circuit(&dil, *layers, &optimizer, *threshold)
                    .map_err(|e| e.to_string())?;
                let res = run_qite_compiled(&out.circuit, case.ising, *shots, noise, seed)
                    .map_err(|e| e.to_string())?;
                Ok((
                    res.histogram,
                    (ground.energy - res.energy).abs(),
                    Some(res.success_probability),
                ))
            }
        }
    })();

    match outcome {
        Ok((histogram, deviation, success)) => {
            row.min_energy_deviation = Some(deviation);
            row.success_probability = success;
            if let (Some(g), Ok(exp), Ok(arg)) = (
                ground,
                return_error(case.instance, case.summary, &histogram, FMode::Expectation),
                return_error(case.instance, case.summary, &histogram, FMode::Argmax),
            ) {
                row.f_error_expectation = Some(exp.f_error);
                row.f_error_argmax = Some(arg.f_error);
                row.matched_optimum =
                    Some(histogram.mode().as_ref() == Some(&g.bitstring));
            }
            row.histogram = Some(histogram);
        }
        Err(e) => row.error = Some(e),
    }
    row.wall_time_s = start.elapsed().as_secs_f64();
    row
}

/// Run the solver at each `p × seed` cell; failures become error rows.
pub fn noise_sweep(
    case: &BenchCase,
    spec: &SolverSpec,
    kind: crate::sim::NoiseKind,
    p_list: &[f64],
    seeds: &[u64],
) -> BenchReport {
    assert!(!p_list.is_empty(), "p_list must be nonempty");
    let cells: Vec<(f64, u64)> = p_list
        .iter()
        .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(p, s)| {
            let noise = if p == 0.0 {
                NoiseModel::none()
            } else {
                NoiseModel::new(kind, p)
            };
            run_solver(case, spec, &noise, s)
        })
        .collect();
    BenchReport { rows }
}

/// Per-instance metrics over a suite; each instance gets a derived seed.
pub fn instance_suite_run(
    cases: &[BenchCase],
    spec: &SolverSpec,
    noise: &NoiseModel,
    base_seed: u64,
) -> BenchReport {
    let rows = cases
        .par_iter()
        .map(|case| {
            run_solver(
                case,
                spec,
                noise,
                rng::derive(base_seed, 0x5, case.instance.instance_id),
            )
        })
        .collect();
    BenchReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ising_from_instance;
    use crate::portfolio::{generate_instance, summarize};
    use approx::assert_relative_eq;

    const THETA: [f64; 3] = [0.8, 0.1, 0.1];

    fn fixture(m: usize, w: usize, seed: u64) -> (PortfolioInstance, FinancialSummary, IsingModel) {
        let inst = generate_instance(m, w, 100, 10.0, THETA, seed, 0).unwrap();
        let s = summarize(&inst).unwrap();
        let ising = ising_from_instance(&inst, &s).unwrap();
        (inst, s, ising)
    }

    #[test]
    fn concentrated_histogram_has_zero_error() {
        let (inst, s, _) = fixture(2, 2, 3);
        let (_, best) = encoding::max_objective(&inst, &s);
        let mut hist = Histogram::empty(4);
        hist.add(best.to_index(), 1000);
        for mode in [FMode::Expectation, FMode::Argmax] {
            let m = return_error(&inst, &s, &hist, mode).unwrap();
            assert_relative_eq!(m.f_error, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn expectation_matches_independent_average() {
        let (inst, s, _) = fixture(2, 2, 5);
        let mut hist = Histogram::empty(4);
        hist.add(0, 3);
        hist.add(5, 1);
        hist.add(9, 4);
        let m = return_error(&inst, &s, &hist, FMode::Expectation).unwrap();
        let table = objective_table(&inst, &s);
        let manual = (3.0 * table[0] + table[5] + 4.0 * table[9]) / 8.0;
        assert_relative_eq!(m.f_circuit, manual, epsilon = 1e-12);
        assert_relative_eq!(m.f_error, m.f_ideal - manual, epsilon = 1e-12);
    }

    #[test]
    fn argmax_uses_most_frequent_bitstring() {
        let (inst, s, _) = fixture(2, 2, 5);
        let mut hist = Histogram::empty(4);
        hist.add(2, 10);
        hist.add(7, 3);
        let m = return_error(&inst, &s, &hist, FMode::Argmax).unwrap();
        let table = objective_table(&inst, &s);
        assert_relative_eq!(m.f_circuit, table[2], epsilon = 1e-12);
    }

    #[test]
    fn uniform_histogram_error_is_order_tens() {
        let (inst, s, _) = fixture(3, 3, 7);
        let mut hist = Histogram::empty(9);
        for x in 0..512u64 {
            hist.add(x, 1);
        }
        let m = return_error(&inst, &s, &hist, FMode::Expectation).unwrap();
        assert!(
            m.f_error > 5.0 && m.f_error < 500.0,
            "uniform-histogram error {}",
            m.f_error
        );
    }

    #[test]
    fn empty_and_mismatched_histograms_rejected() {
        let (inst, s, _) = fixture(2, 2, 3);
        let empty = Histogram::empty(4);
        assert!(matches!(
            return_error(&inst, &s, &empty, FMode::Expectation),
            Err(BenchError::EmptyHistogram)
        ));
        let mut wrong = Histogram::empty(3);
        wrong.add(0, 1);
        assert!(matches!(
            return_error(&inst, &s, &wrong, FMode::Expectation),
            Err(BenchError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn expectation_error_non_negative() {
        let (inst, s, _) = fixture(2, 2, 9);
        for seed in 0..20u64 {
            let mut r = rng::rng_from(seed);
            let mut hist = Histogram::empty(4);
            for _ in 0..30 {
                hist.add(r.gen_range(0..16), 1 + r.gen_range(0..5));
            }
            let m = return_error(&inst, &s, &hist, FMode::Expectation).unwrap();
            assert!(m.f_error >= -1e-12, "negative error {}", m.f_error);
        }
    }

    #[test]
    fn degenerate_basis_state_baseline() {
        let (inst, s, _) = fixture(2, 2, 11);
        let mut probs = vec![0.0; 16];
        probs[6] = 1.0;
        let m = expectation_return_error(&inst, &s, &probs);
        let table = objective_table(&inst, &s);
        assert_relative_eq!(m.f_error, m.f_ideal - table[6], epsilon = 1e-12);
    }

    #[test]
    fn baseline_reproducible_and_positive() {
        let (inst, s, _) = fixture(2, 2, 13);
        let a = random_state_baseline(&inst, &s, 10, 99);
        let b = random_state_baseline(&inst, &s, 10, 99);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_dev, b.std_dev);
        assert!(a.mean > 0.0);
        let c = random_state_baseline(&inst, &s, 10, 100);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn qite_exact_row_matches_optimum() {
        let (inst, s, ising) = fixture(2, 2, 17);
        let case = BenchCase {
            instance: &inst,
            summary: &s,
            ising: &ising,
        };
        let spec = SolverSpec::QiteExact {
            beta: None,
            shots: 4096,
        };
        let row = run_solver(&case, &spec, &NoiseModel::none(), 1);
        assert!(row.error.is_none(), "{:?}", row.error);
        assert_eq!(row.matched_optimum, Some(true));
        assert!(row.success_probability.unwrap() > 0.0);
        assert!(row.f_error_expectation.unwrap() >= -1e-12);
        assert!(row.wall_time_s >= 0.0);
    }

    #[test]
    fn noise_sweep_zero_p_is_noiseless_and_csv_well_formed() {
        let (inst, s, ising) = fixture(2, 2, 19);
        let case = BenchCase {
            instance: &inst,
            summary: &s,
            ising: &ising,
        };
        let spec = SolverSpec::QiteExact {
            beta: None,
            shots: 1024,
        };
        let report = noise_sweep(
            &case,
            &spec,
            crate::sim::NoiseKind::CxXFlip,
            &[0.0],
            &[1, 2, 3],
        );
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert_eq!(row.p, 0.0);
            assert!(row.error.is_none());
        }
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("instance_id,solver,mode,p,seed"));
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 11);
        }
    }

    #[test]
    fn suite_run_is_per_instance_and_empty_suite_is_empty() {
        let instances: Vec<_> = (0..3u64)
            .map(|id| {
                let inst = generate_instance(2, 2, 100, 10.0, THETA, 23, id).unwrap();
                let s = summarize(&inst).unwrap();
                let ising = ising_from_instance(&inst, &s).unwrap();
                (inst, s, ising)
            })
            .collect();
        let cases: Vec<BenchCase> = instances
            .iter()
            .map(|(i, s, m)| BenchCase {
                instance: i,
                summary: s,
                ising: m,
            })
            .collect();
        let spec = SolverSpec::QiteExact {
            beta: None,
            shots: 2048,
        };
        let report = instance_suite_run(&cases, &spec, &NoiseModel::none(), 7);
        assert_eq!(report.rows.len(), 3);
        for (i, row) in report.rows.iter().enumerate() {
            assert_eq!(row.instance_id, i as u64);
            assert_eq!(row.matched_optimum, Some(true));
        }
        let empty = instance_suite_run(&[], &spec, &NoiseModel::none(), 7);
        assert!(empty.rows.is_empty());
    }

    #[test]
    fn failed_cells_are_recorded_not_fatal() {
        let (inst, s, mut ising) = fixture(2, 2, 29);
        ising.ground = None; // forces a per-row failure
        let case = BenchCase {
            instance: &inst,
            summary: &s,
            ising: &ising,
        };
        let spec = SolverSpec::Qaoa(QaoaConfig::default());
        let report = noise_sweep(
            &case,
            &spec,
            crate::sim::NoiseKind::CxXFlip,
            &[0.0, 0.007],
            &[1],
        );
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.error.is_some());
            assert!(row.min_energy_deviation.is_none());
        }
    }
}
