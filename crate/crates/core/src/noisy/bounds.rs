use nalgebra::{DMatrix, DVector};

use crate::error::{dims, invalid, Error, Result};
use crate::linalg::spectral_norm;

/// Scalar ingredients of the steady-state MSE upper bound of the sparse
/// tracking loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBoundInputs {
    /// OMP decay factor of `B`.
    pub decay: f64,
    pub sparsity: usize,
    /// `||A||_2`.
    pub a_norm: f64,
    pub trace_sigma_v: f64,
    /// `trace(A P A^T)` with `P` the steady filter covariance.
    pub trace_apa: f64,
    /// `||(A - I) x_f||^2`.
    pub drift_sq: f64,
    /// Slack; `None` means 5% of the remaining terms.
    pub slack: Option<f64>,
}

impl MseBoundInputs {
    pub fn from_parts(
        a: &DMatrix<f64>,
        p: &DMatrix<f64>,
        sigma_v: &DMatrix<f64>,
        xf: &DVector<f64>,
        xi: f64,
        s: usize,
    ) -> Result<Self> {
        let n = a.nrows();
        if p.shape() != (n, n) || sigma_v.shape() != (n, n) || xf.len() != n {
            return Err(dims("A, P, Sigma_v and x_f must share the state dimension"));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(invalid(format!("decay factor must lie in [0, 1], got {xi}")));
        }
        Ok(Self {
            decay: xi,
            sparsity: s,
            a_norm: spectral_norm(a),
            trace_sigma_v: sigma_v.trace(),
            trace_apa: (a * p * a.transpose()).trace(),
            drift_sq: (a * xf - xf).norm_squared(),
            slack: None,
        })
    }

    /// `chi = 2 xi^s ||A||^2`; the bound needs `chi < 1`.
    pub fn contraction(&self) -> f64 {
        2.0 * self.decay.powi(self.sparsity as i32) * self.a_norm * self.a_norm
    }
}

/// Smallest `s` with `2 xi^s ||A||^2 < 1`, if any.
pub fn required_sparsity(xi: f64, a_norm: f64) -> Option<usize> {
    let scale = 2.0 * a_norm * a_norm;
    if scale < 1.0 || xi == 0.0 {
        return Some(if scale < 1.0 { 0 } else { 1 });
    }
    if xi >= 1.0 {
        return None;
    }
    let mut s = ((1.0 / scale).ln() / xi.ln()).floor().max(0.0) as usize;
    while scale * xi.powi(s as i32) >= 1.0 {
        s += 1;
    }
    Some(s)
}

/// `eta + [2 xi^s ||(A-I) x_f||^2 + trace(Sigma_v) + (1 + 3 xi^s) trace(A P A^T)] / (1 - chi)`.
pub fn mse_upper_bound(inputs: &MseBoundInputs) -> Result<f64> {
    let chi = inputs.contraction();
    if chi >= 1.0 {
        return Err(Error::BoundUndefined {
            chi,
            required_min_s: required_sparsity(inputs.decay, inputs.a_norm),
        });
    }
    let xis = inputs.decay.powi(inputs.sparsity as i32);
    let tracking = 2.0 * xis * inputs.drift_sq / (1.0 - chi);
    let estimation = (inputs.trace_sigma_v + (1.0 + 3.0 * xis) * inputs.trace_apa) / (1.0 - chi);
    let rest = tracking + estimation;
    let eta = inputs.slack.unwrap_or(0.05 * rest);
    if eta < 0.0 {
        return Err(invalid("eta must be >= 0"));
    }
    Ok(eta + rest)
}

/// `trace(Sigma_v) + trace(A P A^T)`: the steady MSE with unconstrained inputs.
pub fn mse_floor(a: &DMatrix<f64>, p: &DMatrix<f64>, sigma_v: &DMatrix<f64>) -> f64 {
    sigma_v.trace() + (a * p * a.transpose()).trace()
}

/// `trace(Sigma_v + A^T P A)`, the transposed form reported alongside
/// [`mse_floor`].
pub fn mse_floor_transposed(a: &DMatrix<f64>, p: &DMatrix<f64>, sigma_v: &DMatrix<f64>) -> f64 {
    sigma_v.trace() + (a.transpose() * p * a).trace()
}
