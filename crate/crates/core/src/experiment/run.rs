use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gramian::{full_gramian, gramian};
use crate::linalg::RankTolerance;
use crate::noisy::{mse_floor_transposed, steady_state_covariance, track, NoiseModel, TrackConfig, TrackingRun};
use crate::recovery::{decay_factor, DEFAULT_DECAY_SAMPLES};
use crate::scheduler::{controllable_schedule, rbn_greedy};
use crate::system::LinearSystem;

use super::generators::{
    erdos_renyi_with_probability, default_edge_probability, graph_to_system, load_edge_list, random_b,
    random_direction, random_feasible_schedule, sub_seed,
};
use super::spec::{ExperimentKind, ExperimentSpec, StateModel};
use crate::noisy::to_db;

/// CSV text plus row accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub rows: usize,
    pub infeasible_rows: usize,
}

impl ExperimentOutput {
    /// True when no row produced data.
    pub fn all_infeasible(&self) -> bool {
        self.rows > 0 && self.rows == self.infeasible_rows
    }
}

struct Table {
    header: &'static str,
    rows: Vec<String>,
    infeasible: usize,
}

impl Table {
    fn new(header: &'static str) -> Self {
        Self {
            header,
            rows: Vec::new(),
            infeasible: 0,
        }
    }

    fn push(&mut self, fields: Vec<String>) {
        if fields.iter().any(|f| f == "infeasible") {
            self.infeasible += 1;
        }
        self.rows.push(fields.join(","));
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn db(x: f64) -> String {
    format!("{:.6}", to_db(x))
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn blanks(count: usize) -> impl Iterator<Item = String> {
    std::iter::repeat_n(String::new(), count)
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Either a bundled graph or a generated state matrix of size `n`.
struct StateSource {
    graph_a: Option<DMatrix<f64>>,
    model: StateModel,
    edge_probability: f64,
    n: usize,
}

impl StateSource {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let graph_a = match &spec.graph {
            Some(path) => Some(graph_to_system(&load_edge_list(path)?)),
            None => None,
        };
        let n = graph_a.as_ref().map_or(spec.n, DMatrix::nrows);
        if n < 2 && spec.system == StateModel::ErdosRenyi && graph_a.is_none() {
            return Err(invalid("n must be at least 2"));
        }
        Ok(Self {
            graph_a,
            model: spec.system,
            edge_probability: spec.edge_probability.unwrap_or_else(|| default_edge_probability(n)),
            n,
        })
    }

    fn sample(&self, seed: u64) -> Result<DMatrix<f64>> {
        if let Some(a) = &self.graph_a {
            return Ok(a.clone());
        }
        match self.model {
            StateModel::Identity => Ok(DMatrix::identity(self.n, self.n)),
            StateModel::ErdosRenyi => erdos_renyi_with_probability(self.n, self.edge_probability, seed),
        }
    }
}

/// Runs the pipeline named by `spec.kind`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let source = StateSource::new(spec)?;
    let table = match spec.kind {
        ExperimentKind::EnergyVsS => energy_vs_s(spec, &source)?,
        ExperimentKind::RelativeEnergy => relative_energy(spec, &source)?,
        ExperimentKind::MseVsTime => mse_vs_time(spec, &source)?,
        ExperimentKind::MseVsM => mse_vs_m(spec, &source)?,
        ExperimentKind::MseVsS => mse_vs_s(spec, &source)?,
        ExperimentKind::MseVsXf => mse_vs_xf(spec, &source)?,
        ExperimentKind::MseVsX0 => mse_vs_x0(spec, &source)?,
    };
    let mut csv = String::new();
    for line in spec.to_config().lines() {
        let _ = writeln!(csv, "# {line}");
    }
    let _ = writeln!(csv, "# n_effective = {}", source.n);
    let _ = writeln!(csv, "{}", table.header);
    for row in &table.rows {
        let _ = writeln!(csv, "{row}");
    }
    Ok(ExperimentOutput {
        csv,
        rows: table.rows.len(),
        infeasible_rows: table.infeasible,
    })
}

struct EnergyTrial {
    greedy: f64,
    li: f64,
    full: f64,
    baseline: Option<f64>,
}

/// `None` when the schedule construction's hypotheses fail for this draw.
fn energy_trial(
    spec: &ExperimentSpec,
    source: &StateSource,
    m: usize,
    s: usize,
    horizon: usize,
    trial: usize,
) -> Result<Option<EnergyTrial>> {
    let tol = RankTolerance::default();
    let seed = sub_seed(spec.seed, trial as u64);
    let a = source.sample(sub_seed(seed, 0))?;
    let b = random_b(source.n, m, spec.b_dist, sub_seed(seed, 1))?;
    let sys = LinearSystem::new(a, b, None)?;
    let base = match controllable_schedule(&sys, s, horizon, tol) {
        Ok(base) => base,
        Err(Error::Precondition(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let greedy = rbn_greedy(&sys, s, horizon, &base, tol)?;
    let trace = |report: crate::gramian::GramianReport| report.trace_inverse;
    let li = trace(gramian(&sys, &base, tol)?).ok_or(Error::NotControllable { rank: 0, n: sys.n() })?;
    let greedy_cost = trace(gramian(&sys, &greedy.schedule, tol)?)
        .ok_or(Error::NotControllable { rank: 0, n: sys.n() })?;
    let full = trace(full_gramian(&sys, horizon, tol)?).ok_or(Error::NotControllable { rank: 0, n: sys.n() })?;
    let baseline_schedule = random_feasible_schedule(m, horizon, s, sub_seed(seed, 2))?;
    let baseline = trace(gramian(&sys, &baseline_schedule, tol)?);
    Ok(Some(EnergyTrial {
        greedy: greedy_cost,
        li,
        full,
        baseline,
    }))
}

fn energy_trials(
    spec: &ExperimentSpec,
    source: &StateSource,
    m: usize,
    s: usize,
    horizon: usize,
) -> Result<Option<Vec<EnergyTrial>>> {
    if s == 0 || s > m {
        return Ok(None);
    }
    let trials: Vec<Option<EnergyTrial>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| energy_trial(spec, source, m, s, horizon, t))
        .collect::<Result<_>>()?;
    Ok(trials.into_iter().collect())
}

fn energy_vs_s(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let m = spec.m.unwrap_or(source.n);
    let s_values = if spec.s_values.is_empty() { vec![2, 3, 4, 5] } else { spec.s_values.clone() };
    let mut table =
        Table::new("s,k,status,greedy_trace,li_trace,full_trace,baseline_trace,baseline_status,baseline_failures");
    for s in s_values {
        let horizon = spec.k.unwrap_or_else(|| source.n.div_ceil(s.max(1)));
        let mut row = vec![s.to_string(), horizon.to_string()];
        match energy_trials(spec, source, m, s, horizon)? {
            None => {
                row.push("infeasible".into());
                row.extend(blanks(6));
            }
            Some(trials) => {
                let failures = trials.iter().filter(|t| t.baseline.is_none()).count();
                row.push("ok".into());
                row.push(num(mean(trials.iter().map(|t| t.greedy))));
                row.push(num(mean(trials.iter().map(|t| t.li))));
                row.push(num(mean(trials.iter().map(|t| t.full))));
                if failures == 0 {
                    row.push(num(mean(trials.iter().filter_map(|t| t.baseline))));
                    row.push("ok".into());
                } else {
                    row.push(String::new());
                    row.push("fails".into());
                }
                row.push(failures.to_string());
            }
        }
        table.push(row);
    }
    Ok(table)
}

fn relative_energy(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let m = spec.m.unwrap_or(source.n);
    let s_values = if spec.s_values.is_empty() { (1..=m).collect() } else { spec.s_values.clone() };
    let horizon = spec.k.unwrap_or(m);
    let mut table = Table::new("s,s_over_m,k,status,rho,m_over_s,greedy_trace,full_trace");
    for s in s_values {
        let mut row = vec![s.to_string(), num(s as f64 / m as f64), horizon.to_string()];
        match energy_trials(spec, source, m, s, horizon)? {
            None => {
                row.push("infeasible".into());
                row.extend(blanks(4));
            }
            Some(trials) => {
                row.push("ok".into());
                row.push(num(mean(trials.iter().map(|t| t.greedy / t.full))));
                row.push(num(m as f64 / s as f64));
                row.push(num(mean(trials.iter().map(|t| t.greedy))));
                row.push(num(mean(trials.iter().map(|t| t.full))));
            }
        }
        table.push(row);
    }
    Ok(table)
}

/// Fixed noisy system for the tracking pipelines; `C = I` when `p = n`.
struct NoisySetup {
    sys: LinearSystem,
    xi: f64,
}

fn noisy_setup(spec: &ExperimentSpec, source: &StateSource, m: usize) -> Result<NoisySetup> {
    let n = source.n;
    let p = spec.p.unwrap_or(n);
    let a = source.sample(sub_seed(spec.seed, 1_000))?;
    let b = random_b(n, m, spec.b_dist, sub_seed(spec.seed, 1_001 + m as u64))?;
    let c = if p == n {
        DMatrix::identity(n, n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, 1_002));
        DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng))
    };
    let xi = decay_factor(&b, DEFAULT_DECAY_SAMPLES, sub_seed(spec.seed, 1_003))?.value;
    Ok(NoisySetup {
        sys: LinearSystem::new(a, b, Some(c))?,
        xi,
    })
}

fn s_sweep(spec: &ExperimentSpec, default: &[usize]) -> Vec<usize> {
    if spec.s_values.is_empty() {
        default.to_vec()
    } else {
        spec.s_values.clone()
    }
}

fn run_track(
    spec: &ExperimentSpec,
    setup: &NoisySetup,
    sigma2: f64,
    s: usize,
    x0: DVector<f64>,
    xf: DVector<f64>,
    stream: u64,
) -> Result<Option<TrackingRun>> {
    if s == 0 || s > setup.sys.m() {
        return Ok(None);
    }
    let noise = NoiseModel::isotropic(setup.sys.n(), setup.sys.p(), sigma2)?;
    let mut cfg = TrackConfig::new(s, spec.horizon, spec.trials, sub_seed(spec.seed, stream), x0, xf);
    cfg.decay = Some(setup.xi);
    track(&setup.sys, &noise, &cfg).map(Some)
}

fn default_target(spec: &ExperimentSpec, n: usize, norm: Option<f64>) -> DVector<f64> {
    random_direction(n, norm.unwrap_or((n as f64).sqrt()), sub_seed(spec.seed, 2_000))
}

fn steady_fields(run: &TrackingRun) -> Vec<String> {
    vec![
        "ok".into(),
        num(run.steady_mse),
        db(run.steady_mse),
        num(run.steady_se),
        db(*run.mse.last().expect("horizon > 0")),
    ]
}

fn mse_vs_time(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let m = spec.m.unwrap_or(2 * source.n);
    let setup = noisy_setup(spec, source, m)?;
    let n = source.n;
    let xf = default_target(spec, n, spec.xf_norms.first().copied());
    let x0 = DVector::zeros(n);
    let sigma2 = spec.sigma2[0];
    let mut table = Table::new("s,step,status,mse,mse_db,bound,floor");
    for s in s_sweep(spec, &[4, 8, 12, 16, 20]) {
        match run_track(spec, &setup, sigma2, s, x0.clone(), xf.clone(), s as u64)? {
            None => table.push(vec![s.to_string(), String::new(), "infeasible".into()].into_iter().chain(blanks(4)).collect()),
            Some(run) => {
                for (k, &mse) in run.mse.iter().enumerate() {
                    table.push(vec![
                        s.to_string(),
                        (k + 1).to_string(),
                        "ok".into(),
                        num(mse),
                        db(mse),
                        opt(run.bound),
                        opt(run.floor),
                    ]);
                }
            }
        }
    }
    Ok(table)
}

fn mse_vs_m(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let n = source.n;
    let m_values = if spec.m_values.is_empty() { vec![n, 2 * n, 3 * n] } else { spec.m_values.clone() };
    let xf = default_target(spec, n, spec.xf_norms.first().copied());
    let sigma2 = spec.sigma2[0];
    let mut table = Table::new("m,s,status,steady_mse,steady_mse_db,steady_se,final_mse_db,floor,floor_db");
    for m in m_values {
        let setup = noisy_setup(spec, source, m)?;
        for s in s_sweep(spec, &[4, 8, 12]) {
            let mut row = vec![m.to_string(), s.to_string()];
            match run_track(spec, &setup, sigma2, s, DVector::zeros(n), xf.clone(), s as u64)? {
                None => {
                    row.push("infeasible".into());
                    row.extend(blanks(6));
                }
                Some(run) => {
                    row.extend(steady_fields(&run));
                    row.push(opt(run.floor));
                    row.push(run.floor.map(db).unwrap_or_default());
                }
            }
            table.push(row);
        }
    }
    Ok(table)
}

fn mse_vs_s(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let n = source.n;
    let m = spec.m.unwrap_or(2 * n);
    let setup = noisy_setup(spec, source, m)?;
    let xf = default_target(spec, n, spec.xf_norms.first().copied());
    let mut table = Table::new(
        "sigma2,s,status,steady_mse,steady_mse_db,steady_se,final_mse_db,bound,floor,floor_db,floor_transposed",
    );
    for &sigma2 in &spec.sigma2 {
        let noise = NoiseModel::isotropic(n, setup.sys.p(), sigma2)?;
        let floor_t = steady_state_covariance(&setup.sys, &noise)
            .ok()
            .map(|ss| mse_floor_transposed(setup.sys.a(), &ss.posterior, noise.sigma_v()));
        for s in s_sweep(spec, &[4, 8, 12, 16, 20]) {
            let mut row = vec![num(sigma2), s.to_string()];
            match run_track(spec, &setup, sigma2, s, DVector::zeros(n), xf.clone(), s as u64)? {
                None => {
                    row.push("infeasible".into());
                    row.extend(blanks(8));
                }
                Some(run) => {
                    row.extend(steady_fields(&run));
                    row.push(opt(run.bound));
                    row.push(opt(run.floor));
                    row.push(run.floor.map(db).unwrap_or_default());
                    row.push(opt(floor_t));
                }
            }
            table.push(row);
        }
    }
    Ok(table)
}

fn mse_vs_xf(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let n = source.n;
    let m = spec.m.unwrap_or(2 * n);
    let setup = noisy_setup(spec, source, m)?;
    let norms = if spec.xf_norms.is_empty() { vec![1.0, 10.0, 100.0] } else { spec.xf_norms.clone() };
    let sigma2 = spec.sigma2[0];
    let mut table = Table::new("xf_norm,log10_xf_norm_sq,s,status,steady_mse,steady_mse_db,steady_se,final_mse_db");
    for norm in norms {
        let xf = default_target(spec, n, Some(norm));
        for s in s_sweep(spec, &[4, 8, 12, 16, 20]) {
            let mut row = vec![num(norm), num((norm * norm).log10()), s.to_string()];
            match run_track(spec, &setup, sigma2, s, DVector::zeros(n), xf.clone(), s as u64)? {
                None => {
                    row.push("infeasible".into());
                    row.extend(blanks(4));
                }
                Some(run) => row.extend(steady_fields(&run)),
            }
            table.push(row);
        }
    }
    Ok(table)
}

fn mse_vs_x0(spec: &ExperimentSpec, source: &StateSource) -> Result<Table> {
    let n = source.n;
    let m = spec.m.unwrap_or(2 * n);
    let setup = noisy_setup(spec, source, m)?;
    let norms = if spec.x0_norms.is_empty() { vec![1.0, 10.0, 100.0] } else { spec.x0_norms.clone() };
    let xf = DVector::from_element(n, 1.0);
    let mut table = Table::new("sigma2,s,x0_norm,status,steady_mse,steady_mse_db,steady_se,final_mse_db,floor,floor_db");
    for &sigma2 in &spec.sigma2 {
        for s in s_sweep(spec, &[4, 10]) {
            for &norm in &norms {
                let x0 = random_direction(n, norm, sub_seed(spec.seed, 3_000));
                let mut row = vec![num(sigma2), s.to_string(), num(norm)];
                match run_track(spec, &setup, sigma2, s, x0, xf.clone(), s as u64)? {
                    None => {
                        row.push("infeasible".into());
                        row.extend(blanks(6));
                    }
                    Some(run) => {
                        row.extend(steady_fields(&run));
                        row.push(opt(run.floor));
                        row.push(run.floor.map(db).unwrap_or_default());
                    }
                }
                table.push(row);
            }
        }
    }
    Ok(table)
}
