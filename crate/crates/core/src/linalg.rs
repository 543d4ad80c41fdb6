//! Dense numerical kernels shared by the rest of the crate.
//!
//! Rank decisions use singular values against a cutoff of
//! `relative_tol * sigma_max * max(rows, cols)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Relative singular-value cutoff for rank decisions and pseudo-inverses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance(f64);

impl RankTolerance {
    pub const DEFAULT: f64 = 1e-10;

    pub fn new(relative_tol: f64) -> Result<Self> {
        if !relative_tol.is_finite() || relative_tol <= 0.0 {
            return Err(invalid(format!(
                "rank tolerance must be positive and finite, got {relative_tol}"
            )));
        }
        Ok(Self(relative_tol))
    }

    pub fn relative(self) -> f64 {
        self.0
    }

    /// Absolute cutoff for a matrix with the given largest singular value and shape.
    pub fn cutoff(self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.0 * sigma_max * rows.max(cols) as f64
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite entries")))
    }
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().singular_values()
}

/// Number of singular values above `tol * sigma_max * max(dims)`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    ensure_finite(m, "matrix")?;
    Ok(rank_unchecked(m, tol))
}

pub(crate) fn rank_unchecked(m: &DMatrix<f64>, tol: RankTolerance) -> usize {
    let sv = singular_values(m);
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let cutoff = tol.cutoff(sigma_max, m.nrows(), m.ncols());
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Minimum-norm least-squares solution of `m x = rhs` with the rank cutoff
/// applied to the singular values. Returns the solution and the numerical rank.
pub(crate) fn min_norm_solve(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tol: RankTolerance,
) -> (DVector<f64>, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (DVector::zeros(cols), 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut x = DVector::zeros(cols);
    if sigma_max == 0.0 {
        return (x, 0);
    }
    let cutoff = tol.cutoff(sigma_max, rows, cols);
    let mut rank = 0;
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cutoff {
            rank += 1;
            let coeff = u.column(i).dot(rhs) / sigma;
            x.axpy(coeff, &v_t.row(i).transpose(), 1.0);
        }
    }
    (x, rank)
}

/// `(m + m^T) / 2`.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub(crate) fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Symmetric square-root factor `L` with `L L^T = m` for a PSD matrix.
/// Negative eigenvalues within rounding are clamped to zero.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(scale);
    }
    factor
}

/// `[I, A, A^2, ..., A^{count-1}]`.
pub(crate) fn matrix_powers(a: &DMatrix<f64>, count: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let mut powers = Vec::with_capacity(count);
    if count == 0 {
        return powers;
    }
    powers.push(DMatrix::identity(n, n));
    for i in 1..count {
        let next = a * &powers[i - 1];
        powers.push(next);
    }
    powers
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}
