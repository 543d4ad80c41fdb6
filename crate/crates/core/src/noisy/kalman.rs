use nalgebra::{DMatrix, DVector};

use crate::error::{dims, Error, Result};
use crate::linalg::{psd_factor, symmetrize, RankTolerance};
use crate::system::LinearSystem;

use super::NoiseModel;

/// Filter estimate `estimate(k)` and its error covariance `P_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub estimate: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl KalmanState {
    pub fn new(estimate: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() != estimate.len() {
            return Err(dims("P must be square with the state dimension"));
        }
        Ok(Self { estimate, covariance })
    }
}

fn check_noise(sys: &LinearSystem, c: &DMatrix<f64>, noise: &NoiseModel) -> Result<()> {
    if noise.state_dim() != sys.n() || noise.measurement_dim() != c.nrows() {
        return Err(dims("noise covariances do not match the system dimensions"));
    }
    Ok(())
}

/// `S C^T (C S C^T + Sigma_w)^{-1}` via Cholesky of the innovation covariance.
fn gain(c: &DMatrix<f64>, s: &DMatrix<f64>, sigma_w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let innovation = symmetrize(&(c * s * c.transpose() + sigma_w));
    let chol = innovation
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    // K = S C^T G^{-1}  <=>  G K^T = C S.
    Ok(chol.solve(&(c * s)).transpose())
}

/// One predict/update cycle. The predicted measurement includes the applied
/// input: `estimate+ = A estimate + B u + K (y - C (A estimate + B u))`.
pub fn kalman_step(
    sys: &LinearSystem,
    state: &KalmanState,
    u_prev: &DVector<f64>,
    y: &DVector<f64>,
    noise: &NoiseModel,
) -> Result<KalmanState> {
    let c = sys.c_required()?;
    check_noise(sys, c, noise)?;
    if state.estimate.len() != sys.n() || u_prev.len() != sys.m() || y.len() != c.nrows() {
        return Err(dims("state, input or measurement has the wrong length"));
    }
    let a = sys.a();
    let predicted_cov = symmetrize(&(a * &state.covariance * a.transpose() + noise.sigma_v()));
    let k = gain(c, &predicted_cov, noise.sigma_w())?;
    let predicted = sys.step(&state.estimate, u_prev);
    let estimate = &predicted + &k * (y - c * &predicted);
    let n = sys.n();
    let p = symmetrize(&((DMatrix::identity(n, n) - &k * c) * predicted_cov));
    Ok(KalmanState { estimate, covariance: p })
}

/// Converged pair `S = A P A^T + Sigma_v`, `P = S - S C^T (C S C^T + Sigma_w)^{-1} C S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Filtered (posterior) covariance.
    pub posterior: DMatrix<f64>,
    /// One-step predicted (prior) covariance.
    pub prior: DMatrix<f64>,
    /// Frobenius residual of the prediction equation.
    pub residual_prediction: f64,
    /// Frobenius residual of the update equation.
    pub residual_update: f64,
    pub iterations: usize,
    /// `(A, Sigma_v^{1/2})` controllable.
    pub noise_controllable: bool,
    /// `(A, C)` observable.
    pub observable: bool,
}

pub const RICCATI_MAX_ITERATIONS: usize = 100_000;

fn update(c: &DMatrix<f64>, s: &DMatrix<f64>, sigma_w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = gain(c, s, sigma_w)?;
    Ok(symmetrize(&(s - k * c * s)))
}

/// Fixed-point iteration from `P_0 = Sigma_v` until
/// `||P_{t+1} - P_t||_F <= 1e-10 (1 + ||P_t||_F)`.
pub fn steady_state_covariance(sys: &LinearSystem, noise: &NoiseModel) -> Result<SteadyState> {
    let c = sys.c_required()?;
    check_noise(sys, c, noise)?;
    let a = sys.a();
    let tol = RankTolerance::default();
    let noise_controllable = LinearSystem::new(a.clone(), psd_factor(noise.sigma_v()), None)?.is_controllable(tol);
    let observable = LinearSystem::new(a.transpose(), c.transpose(), None)?.is_controllable(tol);

    let predict = |p: &DMatrix<f64>| symmetrize(&(a * p * a.transpose() + noise.sigma_v()));
    let mut p = noise.sigma_v().clone();
    let mut change = f64::INFINITY;
    for iteration in 1..=RICCATI_MAX_ITERATIONS {
        let next = update(c, &predict(&p), noise.sigma_w())?;
        change = (&next - &p).norm();
        let converged = change <= 1e-10 * (1.0 + p.norm());
        p = next;
        if converged {
            let s = predict(&p);
            let residual_update = (&p - update(c, &s, noise.sigma_w())?).norm();
            let residual_prediction = (&s - predict(&p)).norm();
            return Ok(SteadyState {
                posterior: p,
                prior: s,
                residual_prediction,
                residual_update,
                iterations: iteration,
                noise_controllable,
                observable,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: RICCATI_MAX_ITERATIONS,
        residual: change,
    })
}
