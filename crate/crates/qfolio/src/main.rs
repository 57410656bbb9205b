//! Command-line driver: instance generation, exact solutions, the two
//! solvers, benchmark sweeps, and the random-state baseline.
//!
//! Exit codes: 0 success, 2 degenerate result (e.g. zero post-selection
//! success), 1 any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qfolio::bench::{
    self, instance_suite_run, noise_sweep, random_state_baseline, BenchCase, SolverSpec,
};
use qfolio::encoding::{decode_z, BitOrder};
use qfolio::io::{self, InstanceFile, Manifest};
use qfolio::optimize::OptimizerConfig;
use qfolio::qaoa::{solve_qaoa, EvalMode, QaoaConfig};
use qfolio::qite::{
    apply_qite_exact, build_dilation, compile_qite_circuit, default_beta, run_qite_compiled,
    QiteError,
};
use qfolio::sim::{Entangler, NoiseKind, NoiseModel, StateVector};

const EXIT_DEGENERATE: u8 = 2;

#[derive(Parser)]
#[command(name = "qfolio", version, about = "Ising-encoded portfolio selection on a noisy statevector simulator")]
struct Cli {
    /// Worker threads for sweeps (default: QFOLIO_JOBS or all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Bitstring rendering in outputs.
    #[arg(long, global = true, value_enum, default_value_t = BitOrderArg::Canonical)]
    bit_order: BitOrderArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BitOrderArg {
    Canonical,
    Reversed,
}

impl From<BitOrderArg> for BitOrder {
    fn from(v: BitOrderArg) -> Self {
        match v {
            BitOrderArg::Canonical => BitOrder::Canonical,
            BitOrderArg::Reversed => BitOrder::Reversed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKindArg {
    None,
    CxXFlip,
    CxDepolarizing,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(v: NoiseKindArg) -> Self {
        match v {
            NoiseKindArg::None => NoiseKind::None,
            NoiseKindArg::CxXFlip => NoiseKind::CxXFlip,
            NoiseKindArg::CxDepolarizing => NoiseKind::CxDepolarizing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EntanglerArg {
    Cx,
    Ecr,
}

impl From<EntanglerArg> for Entangler {
    fn from(v: EntanglerArg) -> Self {
        match v {
            EntanglerArg::Cx => Entangler::Cx,
            EntanglerArg::Ecr => Entangler::Ecr,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    /// Noise channel attached to every CX.
    #[arg(long, value_enum, default_value_t = NoiseKindArg::None)]
    noise: NoiseKindArg,
    /// Error rate p per CX.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        match self.noise {
            NoiseKindArg::None => NoiseModel::none(),
            kind => NoiseModel::new(kind.into(), self.p),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate problem instances with precomputed QUBO/Ising/ground states.
    Gen {
        #[arg(long, default_value_t = 3)]
        assets: usize,
        #[arg(long, default_value_t = 3)]
        slices: usize,
        #[arg(long, default_value_t = 100)]
        history: usize,
        #[arg(long, default_value_t = 10.0)]
        budget: f64,
        /// Objective weights theta1,theta2,theta3 (must sum to 1).
        #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_theta)]
        theta: Theta,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the exact solution of one instance.
    Exact {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        id: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Variational energy minimization on one instance.
    Qaoa {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        id: u64,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// "exact" expectation or shot-sampled estimation.
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long, default_value_t = 4096)]
        shots: usize,
        #[arg(long, default_value_t = 1)]
        trajectories: usize,
        #[arg(long, default_value_t = 1000)]
        max_evals: usize,
        #[arg(long, value_enum, default_value_t = EntanglerArg::Cx)]
        entangler: EntanglerArg,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Imaginary-time evolution (exact dilation or compiled circuit).
    Qite {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        id: u64,
        /// "exact" or "compiled".
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Imaginary time, or "auto" for the gap-adaptive default.
        #[arg(long, default_value = "auto")]
        beta: String,
        #[arg(long, default_value_t = 8192)]
        shots: usize,
        /// Ansatz layers for compiled mode.
        #[arg(long, default_value_t = 4)]
        layers: usize,
        #[arg(long, default_value_t = 5000)]
        max_evals: usize,
        /// Compile-cost convergence threshold.
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sweep a solver over noise levels and seeds across instances.
    Bench {
        #[arg(long)]
        instance: PathBuf,
        /// Restrict to one instance id (default: all).
        #[arg(long)]
        id: Option<u64>,
        /// qaoa | qite-exact | qite-compiled.
        #[arg(long, default_value = "qite-exact")]
        solver: String,
        /// Noise sweep "kind:p1,p2,..." (e.g. cx_x_flip:0.001,0.007).
        #[arg(long)]
        sweep: Option<String>,
        /// Number of seeds per cell (seeds 0..N).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 500)]
        max_evals: usize,
        #[arg(long, default_value_t = 4096)]
        shots: usize,
        #[arg(long, default_value = "auto")]
        beta: String,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path; a JSON twin with histograms sits next to it.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Random-state return-error baseline.
    Baseline {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        id: Option<u64>,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug)]
struct Theta([f64; 3]);

fn parse_theta(s: &str) -> Result<Theta, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match <[f64; 3]>::try_from(parts) {
        Ok(t) => Ok(Theta(t)),
        Err(_) => Err("theta needs exactly three comma-separated values".into()),
    }
}

fn parse_beta(s: &str) -> Result<Option<f64>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| format!("beta must be a number or \"auto\", got {s:?}"))
    }
}

fn parse_sweep(s: &str) -> Result<(NoiseKind, Vec<f64>), String> {
    let (kind, ps) = s
        .split_once(':')
        .ok_or_else(|| "sweep format is kind:p1,p2,...".to_string())?;
    let kind = match kind {
        "cx_x_flip" => NoiseKind::CxXFlip,
        "cx_depolarizing" => NoiseKind::CxDepolarizing,
        other => return Err(format!("unknown noise kind {other:?}")),
    };
    let ps: Vec<f64> = ps
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if ps.is_empty() {
        return Err("sweep needs at least one p".into());
    }
    Ok((kind, ps))
}

struct RunError {
    message: String,
    code: u8,
}

impl RunError {
    fn new(message: impl Into<String>) -> Self {
        RunError {
            message: message.into(),
            code: 1,
        }
    }

    fn degenerate(message: impl Into<String>) -> Self {
        RunError {
            message: message.into(),
            code: EXIT_DEGENERATE,
        }
    }
}

impl<E: std::error::Error> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError::new(e.to_string())
    }
}

fn qite_error(e: QiteError) -> RunError {
    match e {
        QiteError::Degenerate => RunError::degenerate(e.to_string()),
        other => RunError::new(other.to_string()),
    }
}

fn load_case(
    path: &PathBuf,
    id: u64,
) -> Result<
    (
        qfolio::PortfolioInstance,
        qfolio::FinancialSummary,
        qfolio::IsingModel,
    ),
    RunError,
> {
    let file: InstanceFile = io::read_json(path)?;
    file.check_schema()?;
    let record = file.find(id, &path.display().to_string())?;
    let instance = file.instance(record);
    let summary = qfolio::portfolio::summarize(&instance)?;
    let ising = record.ising.to_model();
    Ok((instance, summary, ising))
}

fn rendered_histogram(
    hist: &qfolio::sim::Histogram,
    order: BitOrder,
) -> std::collections::BTreeMap<String, u64> {
    hist.rendered(order)
}

fn write_result<T: Serialize>(
    path: &PathBuf,
    value: &T,
    command: &str,
    config: serde_json::Value,
) -> Result<(), RunError> {
    io::write_output(path, value, &Manifest::new(command, config))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    let order: BitOrder = cli.bit_order.into();
    match cli.command {
        Command::Gen {
            assets,
            slices,
            history,
            budget,
            theta,
            count,
            seed,
            output,
        } => {
            let file =
                InstanceFile::generate(assets, slices, history, budget, theta.0, seed, count)?;
            let config = json!({
                "assets": assets, "slices": slices, "history": history,
                "budget": budget, "theta": theta.0, "count": count, "seed": seed,
            });
            write_result(&output, &file, "gen", config)?;
            eprintln!("wrote {} instances to {}", count, output.display());
            Ok(())
        }
        Command::Exact {
            instance,
            id,
            output,
        } => {
            let (inst, summary, ising) = load_case(&instance, id)?;
            let ground = ising
                .ground
                .clone()
                .ok_or_else(|| RunError::new("instance file lacks a ground state"))?;
            let (f_max, best_bits) = qfolio::encoding::max_objective(&inst, &summary);
            let z = decode_z(&best_bits, inst.asset_count, inst.slices_per_asset)?;
            let result = json!({
                "schema_version": io::SCHEMA_VERSION,
                "instance_id": id,
                "E_g": ground.energy,
                "ground_bitstring": ground.bitstring.render(order),
                "F_max": f_max,
                "best_allocation": z,
            });
            match output {
                Some(path) => write_result(
                    &path,
                    &result,
                    "exact",
                    json!({"instance": instance.display().to_string(), "id": id}),
                )?,
                None => println!("{}", serde_json::to_string_pretty(&result).unwrap()),
            }
            Ok(())
        }
        Command::Qaoa {
            instance,
            id,
            layers,
            mode,
            shots,
            trajectories,
            max_evals,
            entangler,
            noise,
            seed,
            output,
        } => {
            let (_, _, ising) = load_case(&instance, id)?;
            let eval_mode = match mode.as_str() {
                "exact" => EvalMode::Exact,
                "sampled" => EvalMode::Sampled {
                    shots,
                    trajectories_per_eval: trajectories,
                },
                other => return Err(RunError::new(format!("unknown qaoa mode {other:?}"))),
            };
            let config = QaoaConfig {
                layers,
                mode: eval_mode,
                noise: noise.model(),
                optimizer: OptimizerConfig {
                    max_evals,
                    seed,
                    ..QaoaConfig::default().optimizer
                },
                entangler: entangler.into(),
                final_shots: 8192,
            };
            let result = solve_qaoa(&ising, &config, seed)?;
            let body = json!({
                "schema_version": io::SCHEMA_VERSION,
                "instance_id": id,
                "config": config,
                "trace": result.trace.evaluations.iter().enumerate()
                    .map(|(i, e)| json!({"i": i, "cost": e.cost}))
                    .collect::<Vec<_>>(),
                "min_energy_deviation": result.min_energy_deviation,
                "histogram": rendered_histogram(&result.histogram, order),
                "best_params": result.best_params,
            });
            write_result(
                &output,
                &body,
                "qaoa",
                json!({"instance": instance.display().to_string(), "id": id, "config": config}),
            )?;
            eprintln!(
                "qaoa id={id}: min deviation {:.6}",
                result.min_energy_deviation
            );
            Ok(())
        }
        Command::Qite {
            instance,
            id,
            mode,
            beta,
            shots,
            layers,
            max_evals,
            threshold,
            noise,
            seed,
            output,
        } => {
            let (_, _, ising) = load_case(&instance, id)?;
            let beta = parse_beta(&beta)
                .map_err(RunError::new)?
                .unwrap_or_else(|| default_beta(&ising));
            let dilation = build_dilation(&ising, beta).map_err(qite_error)?;
            let (result, compile) = match mode.as_str() {
                "exact" => {
                    let res =
                        apply_qite_exact(&dilation, &StateVector::uniform(ising.n), shots, seed)
                            .map_err(qite_error)?;
                    (res, None)
                }
                "compiled" => {
                    let optimizer = OptimizerConfig {
                        max_evals,
                        seed,
                        ..Default::default()
                    };
                    let out = compile_qite_circuit(&dilation, layers, &optimizer, threshold)
                        .map_err(qite_error)?;
                    if !out.converged {
                        eprintln!(
                            "warning: compile cost {:.4} did not reach threshold {threshold}",
                            out.cost
                        );
                    }
                    let mut res =
                        run_qite_compiled(&out.circuit, &ising, shots, &noise.model(), seed)
                            .map_err(qite_error)?;
                    res.beta = Some(beta);
                    res.u = Some(dilation.u);
                    res.compile_cost = Some(out.cost);
                    (res, Some(out))
                }
                other => return Err(RunError::new(format!("unknown qite mode {other:?}"))),
            };
            let body = json!({
                "schema_version": io::SCHEMA_VERSION,
                "instance_id": id,
                "mode": result.mode,
                "beta": result.beta,
                "u": result.u,
                "success_probability": result.success_probability,
                "energy": result.energy,
                "compile_cost": result.compile_cost,
                "compile_converged": compile.as_ref().map(|c| c.converged),
                "histogram": rendered_histogram(&result.histogram, order),
            });
            write_result(
                &output,
                &body,
                "qite",
                json!({
                    "instance": instance.display().to_string(), "id": id, "mode": mode,
                    "beta": beta, "shots": shots, "layers": layers,
                    "max_evals": max_evals, "threshold": threshold, "seed": seed,
                }),
            )?;
            eprintln!(
                "qite id={id}: success probability {:.4}, energy {:.6}",
                result.success_probability, result.energy
            );
            Ok(())
        }
        Command::Bench {
            instance,
            id,
            solver,
            sweep,
            seeds,
            layers,
            max_evals,
            shots,
            beta,
            threshold,
            seed,
            output,
        } => {
            let file: InstanceFile = io::read_json(&instance)?;
            file.check_schema()?;
            let beta = parse_beta(&beta).map_err(RunError::new)?;
            let spec = match solver.as_str() {
                "qaoa" => SolverSpec::Qaoa(QaoaConfig {
                    layers,
                    mode: EvalMode::sampled(shots),
                    optimizer: OptimizerConfig {
                        max_evals,
                        ..QaoaConfig::default().optimizer
                    },
                    ..Default::default()
                }),
                "qite-exact" => SolverSpec::QiteExact { beta, shots },
                "qite-compiled" => SolverSpec::QiteCompiled {
                    beta,
                    layers,
                    shots,
                    optimizer: OptimizerConfig {
                        max_evals,
                        ..Default::default()
                    },
                    threshold,
                },
                other => return Err(RunError::new(format!("unknown solver {other:?}"))),
            };
            let selected: Vec<_> = file
                .instances
                .iter()
                .filter(|r| id.is_none_or(|want| r.id == want))
                .collect();
            if id.is_some() && selected.is_empty() {
                return Err(RunError::new(format!(
                    "instance id {} not found in {}",
                    id.unwrap(),
                    instance.display()
                )));
            }
            let prepared: Vec<_> = selected
                .iter()
                .map(|record| {
                    let inst = file.instance(record);
                    let summary = qfolio::portfolio::summarize(&inst)?;
                    Ok::<_, RunError>((inst, summary, record.ising.to_model()))
                })
                .collect::<Result<_, _>>()?;
            let cases: Vec<BenchCase> = prepared
                .iter()
                .map(|(i, s, m)| BenchCase {
                    instance: i,
                    summary: s,
                    ising: m,
                })
                .collect();

            let seed_list: Vec<u64> = (0..seeds).map(|s| seed.wrapping_add(s)).collect();
            let report = match sweep.as_deref() {
                Some(s) => {
                    let (kind, p_list) = parse_sweep(s).map_err(RunError::new)?;
                    let mut all = bench::BenchReport::default();
                    for case in &cases {
                        let mut r = noise_sweep(case, &spec, kind, &p_list, &seed_list);
                        all.rows.append(&mut r.rows);
                    }
                    all
                }
                None => {
                    let mut all = bench::BenchReport::default();
                    for &s in &seed_list {
                        let mut r =
                            instance_suite_run(&cases, &spec, &NoiseModel::none(), s);
                        all.rows.append(&mut r.rows);
                    }
                    all
                }
            };

            let config = json!({
                "instance": instance.display().to_string(), "id": id, "solver": solver,
                "sweep": sweep, "seeds": seeds, "layers": layers, "max_evals": max_evals,
                "shots": shots, "threshold": threshold, "seed": seed,
            });
            io::write_text_atomic(&output, &report.to_csv())?;
            let json_path = output.with_extension("json");
            write_result(&json_path, &report, "bench", config)?;
            let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "bench: {} rows ({} failed) -> {} and {}",
                report.rows.len(),
                failed,
                output.display(),
                json_path.display()
            );
            if !report.rows.is_empty() && failed == report.rows.len() {
                return Err(RunError::degenerate("every benchmark cell failed"));
            }
            Ok(())
        }
        Command::Baseline {
            instance,
            id,
            samples,
            seed,
            output,
        } => {
            let file: InstanceFile = io::read_json(&instance)?;
            file.check_schema()?;
            let mut entries = Vec::new();
            for record in file
                .instances
                .iter()
                .filter(|r| id.is_none_or(|want| r.id == want))
            {
                let inst = file.instance(record);
                let summary = qfolio::portfolio::summarize(&inst)?;
                let stats = random_state_baseline(&inst, &summary, samples, seed);
                entries.push(json!({
                    "instance_id": record.id,
                    "mean_f_error": stats.mean,
                    "std_f_error": stats.std_dev,
                    "samples": stats.samples,
                }));
            }
            if entries.is_empty() && id.is_some() {
                return Err(RunError::new(format!(
                    "instance id {} not found in {}",
                    id.unwrap(),
                    instance.display()
                )));
            }
            let body = json!({
                "schema_version": io::SCHEMA_VERSION,
                "samples_per_instance": samples,
                "seed": seed,
                "baselines": entries,
            });
            write_result(
                &output,
                &body,
                "baseline",
                json!({
                    "instance": instance.display().to_string(), "id": id,
                    "samples": samples, "seed": seed,
                }),
            )?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs.or_else(|| {
        std::env::var("QFOLIO_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
