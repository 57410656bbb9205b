//! Derivative-free minimization with full evaluation traces.
//!
//! COBYLA (the primary backend) is provided by the `cobyla` crate, a port
//! of Powell's linear-approximation trust-region method; Nelder-Mead is a
//! local simplex implementation used as a cross-check. Both record every
//! cost evaluation in call order and tolerate stochastic cost functions.

use std::cell::RefCell;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("cost function returned a non-finite value at evaluation {index}")]
    NonFiniteCost { index: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("optimizer backend failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Cobyla,
    NelderMead,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub max_evals: usize,
    /// Initial trust-region radius / simplex step, radians.
    pub rho_begin: f64,
    /// Final radius; optimization stops once steps shrink below it.
    pub rho_end: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::Cobyla,
            max_evals: 1000,
            rho_begin: 0.5,
            rho_end: 1e-4,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<(), OptimizeError> {
        if self.max_evals < 1 {
            return Err(OptimizeError::InvalidConfig("max_evals must be >= 1".into()));
        }
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin) {
            return Err(OptimizeError::InvalidConfig(format!(
                "need 0 < rho_end < rho_begin, got {} and {}",
                self.rho_end, self.rho_begin
            )));
        }
        Ok(())
    }
}

/// One recorded cost evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub params: Vec<f64>,
    pub cost: f64,
}

/// Every evaluation in call order plus the best point seen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptTrace {
    pub evaluations: Vec<Evaluation>,
    pub best_value: f64,
    pub best_params: Vec<f64>,
}

impl OptTrace {
    pub fn from_evaluations(evaluations: Vec<Evaluation>) -> Self {
        let best = evaluations
            .iter()
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).expect("finite costs"))
            .expect("at least one evaluation");
        OptTrace {
            best_value: best.cost,
            best_params: best.params.clone(),
            evaluations,
        }
    }

    /// Running minimum of the cost, indexed like `evaluations`.
    pub fn running_minimum(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.evaluations
            .iter()
            .map(|e| {
                best = best.min(e.cost);
                best
            })
            .collect()
    }

    /// CSV with columns `i,cost,best_so_far`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,cost,best_so_far\n");
        for (e, best) in self.evaluations.iter().zip(self.running_minimum()) {
            out.push_str(&format!("{},{},{}\n", e.index, e.cost, best));
        }
        out
    }
}

struct Recorder<'a> {
    cost: RefCell<Box<dyn FnMut(&[f64]) -> f64 + 'a>>,
    trace: RefCell<Vec<Evaluation>>,
    non_finite_at: RefCell<Option<usize>>,
    max_evals: usize,
}

impl<'a> Recorder<'a> {
    fn new(cost: impl FnMut(&[f64]) -> f64 + 'a, max_evals: usize) -> Self {
        Recorder {
            cost: RefCell::new(Box::new(cost)),
            trace: RefCell::new(Vec::new()),
            non_finite_at: RefCell::new(None),
            max_evals,
        }
    }

    /// Large sentinel steers the backend away once recording has stopped.
    fn eval(&self, x: &[f64]) -> f64 {
        let mut trace = self.trace.borrow_mut();
        if self.non_finite_at.borrow().is_some() || trace.len() >= self.max_evals {
            return 1e30;
        }
        let v = (self.cost.borrow_mut())(x);
        let index = trace.len();
        if !v.is_finite() {
            *self.non_finite_at.borrow_mut() = Some(index);
            return 1e30;
        }
        trace.push(Evaluation {
            index,
            params: x.to_vec(),
            cost: v,
        });
        v
    }

    fn finish(self) -> Result<Vec<Evaluation>, OptimizeError> {
        if let Some(index) = *self.non_finite_at.borrow() {
            return Err(OptimizeError::NonFiniteCost { index });
        }
        Ok(self.trace.into_inner())
    }

    fn done(&self) -> bool {
        self.non_finite_at.borrow().is_some() || self.trace.borrow().len() >= self.max_evals
    }
}

/// Minimize a scalar cost from `initial`, recording every evaluation.
pub fn minimize(
    cost: impl FnMut(&[f64]) -> f64,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<OptTrace, OptimizeError> {
    config.validate()?;
    if initial.is_empty() {
        return Err(OptimizeError::InvalidConfig("empty parameter vector".into()));
    }
    let recorder = Recorder::new(cost, config.max_evals);
    match config.algorithm {
        Algorithm::Cobyla => run_cobyla(&recorder, initial, config)?,
        Algorithm::NelderMead => run_nelder_mead(&recorder, initial, config),
    }
    let evaluations = recorder.finish()?;
    if evaluations.is_empty() {
        return Err(OptimizeError::Backend("no evaluations recorded".into()));
    }
    Ok(OptTrace::from_evaluations(evaluations))
}

fn run_cobyla(
    recorder: &Recorder<'_>,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<(), OptimizeError> {
    // effectively unconstrained: wide box, no inequality constraints
    let bounds = vec![(-1e6, 1e6); initial.len()];
    let cons: Vec<&dyn cobyla::Func<()>> = vec![];
    let f = |x: &[f64], _: &mut ()| recorder.eval(x);
    let stop = cobyla::StopTols {
        xtol_abs: vec![config.rho_end; initial.len()],
        ..Default::default()
    };
    let outcome = cobyla::minimize(
        f,
        initial,
        &bounds,
        &cons,
        (),
        config.max_evals,
        cobyla::RhoBeg::All(config.rho_begin),
        Some(stop),
    );
    match outcome {
        Ok(_) => Ok(()),
        // roundoff-limited stops still leave a usable trace
        Err((cobyla::FailStatus::RoundoffLimited, _, _)) => Ok(()),
        Err((status, _, _)) => Err(OptimizeError::Backend(format!("{status:?}"))),
    }
}

/// Standard Nelder-Mead with reflection/expansion/contraction/shrink.
/// Initial simplex steps are `rho_begin` along each axis; stops when the
/// simplex diameter falls below `rho_end` or the budget is spent.
fn run_nelder_mead(recorder: &Recorder<'_>, initial: &[f64], config: &OptimizerConfig) {
    let n = initial.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(initial.to_vec());
    for i in 0..n {
        let mut v = initial.to_vec();
        v[i] += config.rho_begin;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| recorder.eval(x)).collect();

    loop {
        if recorder.done() {
            return;
        }
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = (0..=n)
            .flat_map(|i| {
                let b = &simplex[best];
                simplex[i]
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        if diameter < config.rho_end {
            return;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| {
                (0..=n)
                    .filter(|&i| i != worst)
                    .map(|i| simplex[i][d])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();

        let reflected: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflected = recorder.eval(&reflected);

        if f_reflected < values[best] {
            let expanded: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflected[d] - centroid[d]))
                .collect();
            let f_expanded = recorder.eval(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
                .collect();
            let f_contracted = recorder.eval(&contracted);
            if f_contracted < values[worst] {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    let shrunk: Vec<f64> = (0..n)
                        .map(|d| simplex[best][d] + sigma * (simplex[i][d] - simplex[best][d]))
                        .collect();
                    simplex[i] = shrunk;
                    values[i] = recorder.eval(&simplex[i]);
                    if recorder.done() {
                        return;
                    }
                }
            }
        }
    }
}

/// Uniform initial angles in `[0, 2 pi)`, deterministic for a seed.
pub fn random_initial_params(count: usize, seed: u64) -> Vec<f64> {
    assert!(count >= 1);
    let mut rng = rng::rng_from(rng::mix(seed, 0x9a0a_11ce));
    (0..count)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn sphere_converges_with_cobyla() {
        let config = OptimizerConfig {
            max_evals: 500,
            ..Default::default()
        };
        let trace = minimize(sphere, &[1.0; 9], &config).unwrap();
        assert!(trace.best_value < 1e-4, "best {}", trace.best_value);
        assert!(trace.evaluations.len() <= 500);
    }

    #[test]
    fn sphere_converges_with_nelder_mead() {
        let config = OptimizerConfig {
            algorithm: Algorithm::NelderMead,
            max_evals: 2000,
            ..Default::default()
        };
        let trace = minimize(sphere, &[1.0; 5], &config).unwrap();
        assert!(trace.best_value < 1e-4, "best {}", trace.best_value);
    }

    #[test]
    fn rosenbrock_converges() {
        let config = OptimizerConfig {
            max_evals: 2000,
            ..Default::default()
        };
        let trace = minimize(rosenbrock, &[-1.2, 1.0], &config).unwrap();
        assert!(trace.best_value < 1e-2, "best {}", trace.best_value);
    }

    #[test]
    fn single_evaluation_budget() {
        let config = OptimizerConfig {
            max_evals: 1,
            ..Default::default()
        };
        let trace = minimize(sphere, &[2.0, 2.0], &config).unwrap();
        assert_eq!(trace.evaluations.len(), 1);
        assert_eq!(trace.best_value, 8.0);
    }

    #[test]
    fn running_minimum_is_monotone() {
        for algorithm in [Algorithm::Cobyla, Algorithm::NelderMead] {
            let config = OptimizerConfig {
                algorithm,
                max_evals: 300,
                ..Default::default()
            };
            let trace = minimize(rosenbrock, &[0.5, -0.5], &config).unwrap();
            let mins = trace.running_minimum();
            assert!(mins.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(*mins.last().unwrap(), trace.best_value);
        }
    }

    #[test]
    fn deterministic_trace() {
        let config = OptimizerConfig {
            max_evals: 200,
            ..Default::default()
        };
        let a = minimize(sphere, &[1.0; 4], &config).unwrap();
        let b = minimize(sphere, &[1.0; 4], &config).unwrap();
        assert_eq!(a.evaluations.len(), b.evaluations.len());
        for (x, y) in a.evaluations.iter().zip(&b.evaluations) {
            assert_eq!(x.params, y.params);
            assert_eq!(x.cost, y.cost);
        }
    }

    #[test]
    fn stochastic_cost_respects_budget() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(5);
        let noisy = move |x: &[f64]| sphere(x) + rng.gen_range(-0.1..0.1);
        let config = OptimizerConfig {
            max_evals: 150,
            ..Default::default()
        };
        let trace = minimize(noisy, &[1.0; 6], &config).unwrap();
        assert!(trace.evaluations.len() <= 150);
    }

    #[test]
    fn non_finite_cost_surfaces_with_index() {
        let mut calls = 0usize;
        let cost = move |x: &[f64]| {
            calls += 1;
            if calls == 3 {
                f64::NAN
            } else {
                sphere(x)
            }
        };
        let config = OptimizerConfig {
            max_evals: 100,
            ..Default::default()
        };
        match minimize(cost, &[1.0; 3], &config) {
            Err(OptimizeError::NonFiniteCost { index }) => assert_eq!(index, 2),
            other => panic!("expected NonFiniteCost, got {other:?}"),
        }
    }

    #[test]
    fn random_initial_params_contract() {
        let a = random_initial_params(54, 9);
        let b = random_initial_params(54, 9);
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| (0.0..std::f64::consts::TAU).contains(&v)));
        let mut distinct = 0;
        for s in 0..100u64 {
            let x = random_initial_params(8, s);
            let y = random_initial_params(8, s + 1);
            if x != y {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 100);
    }
}
