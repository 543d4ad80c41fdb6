//! Command-line front end: schedules, energies, tracking runs,
//! experiment sweeps and initial-state estimation.
//!
//! Exit codes: 0 success, 2 usage error, 3 infeasible, 4 numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use sparsectl::experiment::{
    default_edge_probability, erdos_renyi_with_probability, graph_to_system, load_edge_list, load_matrix,
    load_vectors, random_b, random_direction, run_experiment, sub_seed, BDistribution, ExperimentKind, ExperimentSpec,
};
use sparsectl::noisy::{mse_floor_transposed, steady_state_covariance, track, NoiseModel, TrackConfig};
use sparsectl::scheduler::{controllable_schedule, energy_aware_controllable_schedule, estimate_x0, rbn_greedy, sensor_schedule};
use sparsectl::{full_gramian, gramian, ActuatorSchedule, Error, LinearSystem, RankTolerance};

#[derive(Parser)]
#[command(name = "sparsectl", version, about = "Sparse actuator scheduling and sparse tracking control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an s-sparse controllable actuator schedule.
    Schedule(ScheduleArgs),
    /// Report Gramian rank and average energy of a schedule file.
    Energy(EnergyArgs),
    /// Run the Kalman + OMP tracking loop and write per-step MSE as CSV.
    Track(TrackArgs),
    /// Run an experiment sweep and write CSV.
    Experiment(ExperimentArgs),
    /// Schedule sensors and recover x(0) from measurements.
    EstimateX0(EstimateArgs),
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// State matrix file (whitespace-separated rows).
    #[arg(long)]
    a_file: Option<PathBuf>,
    /// Input matrix file.
    #[arg(long)]
    b_file: Option<PathBuf>,
    /// Edge list whose consensus matrix I - L/n becomes A.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value_t = BDist::Gaussian)]
    b_dist: BDist,
    /// Edge probability of the generated graph (default 2 ln n / n).
    #[arg(long)]
    edge_probability: Option<f64>,
    /// Seed for every random draw; required whenever something is generated.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy)]
enum BDist {
    Uniform01,
    Gaussian,
    Identity,
}

impl From<BDist> for BDistribution {
    fn from(d: BDist) -> Self {
        match d {
            BDist::Uniform01 => BDistribution::Uniform01,
            BDist::Gaussian => BDistribution::Gaussian,
            BDist::Identity => BDistribution::Identity,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Method {
    /// Independent columns, least aligned with the current span first.
    Li,
    /// Independent columns chosen to lower the regularised energy.
    EnergyAware,
    /// Independent-column start refined greedily to fill every slot.
    Greedy,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    s: usize,
    /// Horizon (default ceil(n / s)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Greedy)]
    method: Method,
    /// Regulariser for the energy-aware method.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Schedule file: line k lists the 1-based actuators of step k.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    s: Option<usize>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 40)]
    horizon: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    sigma2: f64,
    /// Norm of the random target (default sqrt(n)).
    #[arg(long)]
    xf_norm: Option<f64>,
    /// Drive to the all-ones consensus state instead of a random target.
    #[arg(long)]
    consensus: bool,
    #[arg(long, default_value_t = 0.0)]
    x0_norm: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// energy-vs-s, relative-energy, mse-vs-time, mse-vs-m, mse-vs-s, mse-vs-xf or mse-vs-x0.
    id: Option<String>,
    /// key = value file; its entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Sparsity list, e.g. 2,3,4 or 2:10.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Noise variance list, e.g. 1e-4,1e-2.
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long)]
    b_dist: Option<String>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Measurement matrix file.
    #[arg(long)]
    c_file: PathBuf,
    /// Row k holds the full measurement y(k).
    #[arg(long)]
    measurements: PathBuf,
    /// Row k holds the applied input u(k); omitted means zero inputs.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Sensors per step (default max(1, n - rank A)).
    #[arg(long)]
    s: Option<usize>,
    /// Horizon (default ceil(n / s)).
    #[arg(long)]
    k: Option<usize>,
}

/// Error with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotControllable { .. } | Error::Precondition(_) => 3,
            Error::Numerical(_) | Error::NonConvergence { .. } | Error::BoundUndefined { .. } => 4,
            Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Parse { .. } | Error::Io(_) => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| usage(format!("--seed is required to generate {what}")))
}

fn load(path: &Path) -> CliResult<DMatrix<f64>> {
    load_matrix(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl SystemArgs {
    fn state_matrix(&self) -> CliResult<DMatrix<f64>> {
        if let Some(path) = &self.a_file {
            return load(path);
        }
        if let Some(path) = &self.graph {
            let g = load_edge_list(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            return Ok(graph_to_system(&g));
        }
        let n = self.n.ok_or_else(|| usage("give --a-file, --graph or --n"))?;
        let seed = require_seed(self.seed, "A")?;
        let pe = self.edge_probability.unwrap_or_else(|| default_edge_probability(n));
        Ok(erdos_renyi_with_probability(n, pe, sub_seed(seed, 0))?)
    }

    fn input_matrix(&self, n: usize) -> CliResult<DMatrix<f64>> {
        if let Some(path) = &self.b_file {
            return load(path);
        }
        let m = self.m.unwrap_or(n);
        let dist = BDistribution::from(self.b_dist);
        let seed = match dist {
            BDistribution::Identity => self.seed.unwrap_or(0),
            _ => require_seed(self.seed, "B")?,
        };
        Ok(random_b(n, m, dist, sub_seed(seed, 1))?)
    }

    fn system(&self, c: Option<DMatrix<f64>>) -> CliResult<LinearSystem> {
        let a = self.state_matrix()?;
        let b = self.input_matrix(a.nrows())?;
        Ok(LinearSystem::new(a, b, c)?)
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.10e}")).unwrap_or_else(|| "undefined".into())
}

fn cmd_schedule(args: &ScheduleArgs) -> CliResult<()> {
    let tol = RankTolerance::default();
    let sys = args.system.system(None)?;
    if args.s == 0 {
        return Err(usage("--s must be positive"));
    }
    let horizon = args.k.unwrap_or_else(|| sys.n().div_ceil(args.s));
    let schedule = match args.method {
        Method::Li => controllable_schedule(&sys, args.s, horizon, tol)?,
        Method::EnergyAware => energy_aware_controllable_schedule(&sys, args.s, horizon, args.eps, tol)?.schedule,
        Method::Greedy => {
            let base = controllable_schedule(&sys, args.s, horizon, tol)?;
            rbn_greedy(&sys, args.s, horizon, &base, tol)?.schedule
        }
    };
    let report = gramian(&sys, &schedule, tol)?;
    eprintln!(
        "n = {}, m = {}, s = {}, K = {}, rank = {}, trace_inverse = {}",
        sys.n(),
        sys.m(),
        args.s,
        horizon,
        report.rank,
        fmt_opt(report.trace_inverse)
    );
    emit(args.out.as_deref(), &schedule.to_text())
}

fn cmd_energy(args: &EnergyArgs) -> CliResult<()> {
    let tol = RankTolerance::default();
    let sys = args.system.system(None)?;
    let text = std::fs::read_to_string(&args.schedule).map_err(|e| usage(format!("{}: {e}", args.schedule.display())))?;
    let schedule = ActuatorSchedule::parse_text(&text, args.s)?;
    let report = gramian(&sys, &schedule, tol)?;
    let full = full_gramian(&sys, schedule.horizon(), tol)?;
    let relative = report.trace_inverse.zip(full.trace_inverse).map(|(a, b)| a / b);
    let mut out = String::new();
    let _ = writeln!(out, "horizon = {}", schedule.horizon());
    let _ = writeln!(out, "pairs = {}", schedule.total_pairs());
    let _ = writeln!(out, "rank = {}", report.rank);
    let _ = writeln!(out, "trace_inverse = {}", fmt_opt(report.trace_inverse));
    let _ = writeln!(out, "lambda_min = {:.10e}", report.lambda_min);
    let _ = writeln!(out, "lambda_max = {:.10e}", report.lambda_max);
    let _ = writeln!(out, "full_trace_inverse = {}", fmt_opt(full.trace_inverse));
    let _ = writeln!(out, "relative_energy = {}", fmt_opt(relative));
    print!("{out}");
    if report.trace_inverse.is_none() {
        return Err(Error::NotControllable {
            rank: report.rank,
            n: sys.n(),
        }
        .into());
    }
    Ok(())
}

fn cmd_track(args: &TrackArgs) -> CliResult<()> {
    let seed = require_seed(args.system.seed, "noise")?;
    let a = args.system.state_matrix()?;
    let n = a.nrows();
    let p = args.p.unwrap_or(n);
    let c = if p == n {
        DMatrix::identity(n, n)
    } else {
        random_b(p, n, BDistribution::Gaussian, sub_seed(seed, 2))?
    };
    let b = args.system.input_matrix(n)?;
    let sys = LinearSystem::new(a, b, Some(c))?;
    let noise = NoiseModel::isotropic(n, p, args.sigma2)?;
    let xf = if args.consensus {
        DVector::from_element(n, 1.0)
    } else {
        random_direction(n, args.xf_norm.unwrap_or((n as f64).sqrt()), sub_seed(seed, 3))
    };
    let x0 = random_direction(n, args.x0_norm, sub_seed(seed, 4));
    let cfg = TrackConfig::new(args.s, args.horizon, args.trials, sub_seed(seed, 5), x0, xf);
    let run = track(&sys, &noise, &cfg)?;
    let floor_t = steady_state_covariance(&sys, &noise)
        .ok()
        .map(|ss| mse_floor_transposed(sys.a(), &ss.posterior, noise.sigma_v()));
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# n = {n}, m = {}, p = {p}, s = {}, horizon = {}, trials = {}, sigma2 = {}, seed = {seed}",
        sys.m(),
        args.s,
        args.horizon,
        args.trials,
        args.sigma2
    );
    let _ = writeln!(text, "# steady_mse = {:.10e}, steady_se = {:.10e}", run.steady_mse, run.steady_se);
    let _ = writeln!(text, "# floor = {}, floor_transposed = {}", fmt_opt(run.floor), fmt_opt(floor_t));
    let _ = writeln!(text, "# bound = {}", fmt_opt(run.bound));
    text.push_str(&run.to_csv());
    emit(args.out.as_deref(), &text)
}

fn cmd_experiment(args: &ExperimentArgs) -> CliResult<()> {
    let kind: Option<ExperimentKind> = args.id.as_deref().map(str::parse).transpose()?;
    let mut spec = ExperimentSpec::new(kind.unwrap_or(ExperimentKind::EnergyVsS), args.seed.unwrap_or(0));
    let mut set = |key: &str, value: Option<String>| -> CliResult<()> {
        if let Some(v) = value {
            spec.set(key, &v)?;
        }
        Ok(())
    };
    set("n", args.n.map(|v| v.to_string()))?;
    set("m", args.m.map(|v| v.to_string()))?;
    set("p", args.p.map(|v| v.to_string()))?;
    set("s", args.s.clone())?;
    set("k", args.k.map(|v| v.to_string()))?;
    set("horizon", args.horizon.map(|v| v.to_string()))?;
    set("trials", args.trials.map(|v| v.to_string()))?;
    set("sigma2", args.sigma2.clone())?;
    set("b_dist", args.b_dist.clone())?;
    set("graph", args.graph.as_ref().map(|g| g.display().to_string()))?;
    let mut has_kind = kind.is_some();
    let mut has_seed = args.seed.is_some();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        spec.apply_config(&text)?;
        for line in text.lines() {
            if let Some((key, _)) = line.split('#').next().unwrap_or("").split_once('=') {
                has_kind |= key.trim() == "experiment";
                has_seed |= key.trim() == "seed";
            }
        }
    }
    if !has_kind {
        return Err(usage("name an experiment or set experiment = ... in --config"));
    }
    if !has_seed {
        return Err(usage("--seed (or seed = ... in --config) is required"));
    }
    let output = run_experiment(&spec)?;
    emit(args.out.as_deref(), &output.csv)?;
    if output.all_infeasible() {
        return Err(Failure {
            code: 3,
            message: "every configuration was infeasible".into(),
        });
    }
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let tol = RankTolerance::default();
    let c = load(&args.c_file)?;
    let sys = args.system.system(Some(c))?;
    let rank_a = sparsectl::numerical_rank(sys.a(), tol)?;
    let s = args.s.unwrap_or_else(|| (sys.n() - rank_a).max(1));
    let horizon = args.k.unwrap_or_else(|| sys.n().div_ceil(s.max(1)));
    let schedule = sensor_schedule(&sys, s, horizon, tol)?;
    let measurements = load_vectors(&args.measurements).map_err(|e| usage(e.to_string()))?;
    let inputs = match &args.inputs {
        Some(path) => load_vectors(path).map_err(|e| usage(e.to_string()))?,
        None => Vec::new(),
    };
    let x0 = estimate_x0(&sys, &schedule, &measurements, &inputs, tol)?;
    let mut out = String::from("# sensor schedule (1-based, one line per step)\n");
    for set in schedule.sets() {
        let line: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "# {}", line.join(" "));
    }
    for v in x0.iter() {
        let _ = writeln!(out, "{v:.15e}");
    }
    print!("{out}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Schedule(a) => cmd_schedule(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Track(a) => cmd_track(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::EstimateX0(a) => cmd_estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
