use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{dims, invalid, Result};
use crate::linalg::{sym_eigenvalues, symmetrize};
use crate::recovery::{decay_factor, omp, DEFAULT_DECAY_SAMPLES};
use crate::system::LinearSystem;

use super::bounds::{mse_floor, mse_upper_bound, MseBoundInputs};
use super::kalman::{kalman_step, steady_state_covariance, KalmanState};
use super::NoiseModel;

/// State and input weights: OMP then fits `B^T Q (x_f - A estimate)` over the
/// dictionary `B^T Q B + R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    pub state_weight: DMatrix<f64>,
    pub input_weight: DMatrix<f64>,
}

/// Parameters of a Monte Carlo tracking run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackConfig {
    pub sparsity: usize,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub x0: DVector<f64>,
    pub xf: DVector<f64>,
    pub reg: Option<Regularizer>,
    /// OMP stops once `||r|| <= omp_tol ||target||`.
    pub omp_tol: f64,
    /// Decay factor for the bound; estimated from `B` when absent.
    pub decay: Option<f64>,
}

impl TrackConfig {
    pub fn new(sparsity: usize, horizon: usize, trials: usize, seed: u64, x0: DVector<f64>, xf: DVector<f64>) -> Self {
        Self {
            sparsity,
            horizon,
            trials,
            seed,
            x0,
            xf,
            reg: None,
            omp_tol: 1e-12,
            decay: None,
        }
    }
}

/// Output of [`track`]. Per-step series cover `k = 1..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    /// `x(0..=horizon)` of trial 0.
    pub states: Vec<DVector<f64>>,
    /// `estimate(0..horizon)` of trial 0.
    pub estimates: Vec<DVector<f64>>,
    /// `u(0..horizon)` of trial 0.
    pub inputs: Vec<DVector<f64>>,
    /// `||x(k) - x_f||^2` of trial 0.
    pub squared_errors: Vec<f64>,
    /// Monte Carlo mean of `||x(k) - x_f||^2`.
    pub mse: Vec<f64>,
    /// Mean over trials of each trial's average over the last quarter of steps.
    pub steady_mse: f64,
    /// Standard error of `steady_mse` across trials.
    pub steady_se: f64,
    pub bound: Option<f64>,
    pub floor: Option<f64>,
    pub trials: usize,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl TrackingRun {
    pub fn horizon(&self) -> usize {
        self.mse.len()
    }

    pub fn steady_mse_db(&self) -> f64 {
        to_db(self.steady_mse)
    }

    /// CSV with columns `step,mse,mse_db,bound,floor`; missing values are empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        let mut out = String::from("step,mse,mse_db,bound,floor\n");
        for (k, &mse) in self.mse.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{:.10e},{:.6},{},{}",
                k + 1,
                mse,
                to_db(mse),
                opt(self.bound),
                opt(self.floor)
            );
        }
        out
    }
}

struct TrialOutput {
    states: Vec<DVector<f64>>,
    estimates: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    errors: Vec<f64>,
}

/// Number of trailing steps averaged for the steady-state estimate.
pub fn steady_window(horizon: usize) -> usize {
    horizon.div_ceil(4).max(1)
}

fn check_regularizer(reg: &Regularizer, n: usize, m: usize) -> Result<()> {
    if reg.state_weight.shape() != (n, n) || reg.input_weight.shape() != (m, m) {
        return Err(dims("Q must be n x n and R must be m x m"));
    }
    let q_sym = (&reg.state_weight - reg.state_weight.transpose()).abs().max() <= 1e-12;
    if !q_sym || sym_eigenvalues(&reg.state_weight).first().is_some_and(|&l| l < -1e-12) {
        return Err(invalid("Q must be symmetric positive semidefinite"));
    }
    let r_sym = (&reg.input_weight - reg.input_weight.transpose()).abs().max() <= 1e-12;
    if !r_sym || symmetrize(&reg.input_weight).cholesky().is_none() {
        return Err(invalid("R must be symmetric positive definite"));
    }
    Ok(())
}

fn run_trial(
    sys: &LinearSystem,
    noise: &NoiseModel,
    cfg: &TrackConfig,
    dict: &DMatrix<f64>,
    trial: usize,
) -> Result<TrialOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let c = sys.c_required()?;
    let n = sys.n();
    let mut x = cfg.x0.clone();
    let mut filter = KalmanState::new(cfg.x0.clone(), DMatrix::zeros(n, n))?;
    let mut out = TrialOutput {
        states: vec![x.clone()],
        estimates: Vec::with_capacity(cfg.horizon),
        inputs: Vec::with_capacity(cfg.horizon),
        errors: Vec::with_capacity(cfg.horizon),
    };
    for k in 0..cfg.horizon {
        let gap = &cfg.xf - sys.a() * &filter.estimate;
        let target = match &cfg.reg {
            Some(reg) => sys.b().transpose() * &reg.state_weight * gap,
            None => gap,
        };
        let u = omp(dict, &target, cfg.sparsity, cfg.omp_tol)?.coefficients;
        x = sys.step(&x, &u) + noise.sample_process(&mut rng);
        out.errors.push((&x - &cfg.xf).norm_squared());
        out.estimates.push(filter.estimate.clone());
        // The estimate after the last input is never used.
        if k + 1 < cfg.horizon {
            let y = c * &x + noise.sample_measurement(&mut rng);
            filter = kalman_step(sys, &filter, &u, &y, noise)?;
        }
        out.states.push(x.clone());
        out.inputs.push(u);
    }
    Ok(out)
}

/// Closed loop: `u(k) = omp(B, x_f - A estimate(k), s)`, `x(k+1) = A x(k) + B u(k) + v(k)`,
/// `y(k+1) = C x(k+1) + w(k+1)`, then a Kalman update. Starts from
/// `estimate(0) = x(0)` with zero covariance. Trials use independent ChaCha
/// streams of `seed` and run in parallel.
pub fn track(sys: &LinearSystem, noise: &NoiseModel, cfg: &TrackConfig) -> Result<TrackingRun> {
    let c = sys.c_required()?;
    let (n, m) = (sys.n(), sys.m());
    if noise.state_dim() != n || noise.measurement_dim() != c.nrows() {
        return Err(dims("noise covariances do not match the system dimensions"));
    }
    if cfg.x0.len() != n || cfg.xf.len() != n {
        return Err(dims(format!("x0 and xf must have length {n}")));
    }
    if cfg.sparsity == 0 || cfg.horizon == 0 || cfg.trials == 0 {
        return Err(invalid("s, horizon and trials must be positive"));
    }
    let dict = match &cfg.reg {
        Some(reg) => {
            check_regularizer(reg, n, m)?;
            sys.b().transpose() * &reg.state_weight * sys.b() + &reg.input_weight
        }
        None => sys.b().clone(),
    };

    let outputs: Vec<TrialOutput> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(sys, noise, cfg, &dict, t))
        .collect::<Result<_>>()?;

    let trials = cfg.trials as f64;
    let mse: Vec<f64> = (0..cfg.horizon)
        .map(|k| outputs.iter().map(|o| o.errors[k]).sum::<f64>() / trials)
        .collect();
    let window = steady_window(cfg.horizon);
    let per_trial: Vec<f64> = outputs
        .iter()
        .map(|o| o.errors[cfg.horizon - window..].iter().sum::<f64>() / window as f64)
        .collect();
    let steady_mse = per_trial.iter().sum::<f64>() / trials;
    let steady_se = if cfg.trials > 1 {
        let var = per_trial.iter().map(|v| (v - steady_mse).powi(2)).sum::<f64>() / (trials - 1.0);
        (var / trials).sqrt()
    } else {
        0.0
    };

    let (bound, floor) = match steady_state_covariance(sys, noise) {
        Ok(ss) => {
            let floor = mse_floor(sys.a(), &ss.posterior, noise.sigma_v());
            let bound = if cfg.reg.is_none() {
                let xi = match cfg.decay {
                    Some(xi) => Some(xi),
                    None => decay_factor(sys.b(), DEFAULT_DECAY_SAMPLES, cfg.seed).ok().map(|d| d.value),
                };
                xi.and_then(|xi| {
                    let inputs = MseBoundInputs::from_parts(sys.a(), &ss.posterior, noise.sigma_v(), &cfg.xf, xi, cfg.sparsity).ok()?;
                    mse_upper_bound(&inputs).ok()
                })
            } else {
                None
            };
            (bound, Some(floor))
        }
        Err(_) => (None, None),
    };

    let first = outputs.into_iter().next().expect("trials > 0");
    Ok(TrackingRun {
        states: first.states,
        estimates: first.estimates,
        inputs: first.inputs,
        squared_errors: first.errors,
        mse,
        steady_mse,
        steady_se,
        bound,
        floor,
        trials: cfg.trials,
    })
}
