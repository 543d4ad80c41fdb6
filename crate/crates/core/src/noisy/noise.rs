use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::{ensure_finite, psd_factor, sym_eigenvalues};

/// Gaussian process noise `v ~ N(0, Sigma_v)` and measurement noise
/// `w ~ N(0, Sigma_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma_v: DMatrix<f64>,
    sigma_w: DMatrix<f64>,
    factor_v: DMatrix<f64>,
    factor_w: DMatrix<f64>,
}

fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("{what} must be square")));
    }
    ensure_finite(m, what)?;
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(invalid(format!("{what} is not symmetric (max asymmetry {asym:e})")));
    }
    if let Some(&lowest) = sym_eigenvalues(m).first() {
        if lowest < -1e-12 {
            return Err(invalid(format!("{what} has negative eigenvalue {lowest:e}")));
        }
    }
    Ok(())
}

impl NoiseModel {
    pub fn new(sigma_v: DMatrix<f64>, sigma_w: DMatrix<f64>) -> Result<Self> {
        check_psd(&sigma_v, "Sigma_v")?;
        check_psd(&sigma_w, "Sigma_w")?;
        let factor_v = psd_factor(&sigma_v);
        let factor_w = psd_factor(&sigma_w);
        Ok(Self {
            sigma_v,
            sigma_w,
            factor_v,
            factor_w,
        })
    }

    /// `Sigma_v = variance I_n`, `Sigma_w = variance I_p`.
    pub fn isotropic(n: usize, p: usize, variance: f64) -> Result<Self> {
        if variance.is_nan() || variance < 0.0 {
            return Err(invalid(format!("noise variance must be >= 0, got {variance}")));
        }
        Self::new(
            DMatrix::identity(n, n) * variance,
            DMatrix::identity(p, p) * variance,
        )
    }

    pub fn sigma_v(&self) -> &DMatrix<f64> {
        &self.sigma_v
    }

    pub fn sigma_w(&self) -> &DMatrix<f64> {
        &self.sigma_w
    }

    pub fn state_dim(&self) -> usize {
        self.sigma_v.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.sigma_w.nrows()
    }

    pub fn sample_process<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        sample(&self.factor_v, rng)
    }

    pub fn sample_measurement<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        sample(&self.factor_w, rng)
    }
}

fn sample<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    factor * z
}
