//! Controllability matrices, Gramians and the energy metrics built on them.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::{matrix_powers, sym_eigenvalues, RankTolerance};
use crate::schedule::ActuatorSchedule;
use crate::system::LinearSystem;

/// Column of the controllability matrix for pair `(k, j)`: `A^{K-k-1} B_j`.
pub(crate) fn pair_column(
    sys: &LinearSystem,
    powers: &[DMatrix<f64>],
    horizon: usize,
    k: usize,
    j: usize,
) -> DVector<f64> {
    &powers[horizon - k - 1] * sys.b().column(j)
}

fn check_schedule(sys: &LinearSystem, schedule: &ActuatorSchedule) -> Result<()> {
    if let Some(j) = schedule.max_actuator() {
        if j >= sys.m() {
            return Err(invalid(format!(
                "actuator index {} out of range for m = {}",
                j + 1,
                sys.m()
            )));
        }
    }
    Ok(())
}

/// `R_S = [A^{K-1} B_{S_0}, A^{K-2} B_{S_1}, ..., B_{S_{K-1}}]`.
pub fn controllability_matrix(sys: &LinearSystem, schedule: &ActuatorSchedule) -> Result<DMatrix<f64>> {
    check_schedule(sys, schedule)?;
    let horizon = schedule.horizon();
    let powers = matrix_powers(sys.a(), horizon);
    let mut r = DMatrix::zeros(sys.n(), schedule.total_pairs());
    let mut col = 0;
    for (k, set) in schedule.sets().iter().enumerate() {
        for &j in set {
            r.set_column(col, &pair_column(sys, &powers, horizon, k, j));
            col += 1;
        }
    }
    Ok(r)
}

/// Spectral summary of a controllability Gramian.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianReport {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// `trace(W^{-1})`, present iff `rank == n`.
    pub trace_inverse: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    eigenvalues: Vec<f64>,
}

impl GramianReport {
    /// Builds a report from a PSD matrix using its symmetric eigendecomposition.
    pub fn from_matrix(w: DMatrix<f64>, tol: RankTolerance) -> Result<Self> {
        if !w.is_square() {
            return Err(invalid("Gramian must be square"));
        }
        let eigenvalues: Vec<f64> = sym_eigenvalues(&w).into_iter().map(|l| l.max(0.0)).collect();
        let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
        let n = w.nrows();
        let rank = if lambda_max == 0.0 {
            0
        } else {
            let cutoff = tol.cutoff(lambda_max, n, n);
            eigenvalues.iter().filter(|&&l| l > cutoff).count()
        };
        Ok(Self::assemble(w, rank, eigenvalues))
    }

    /// Builds a report from `W = R R^T` using the singular values of `R`,
    /// which keeps the small eigenvalues accurate.
    fn from_factor(w: DMatrix<f64>, r: &DMatrix<f64>, tol: RankTolerance) -> Self {
        let n = w.nrows();
        let mut eigenvalues = vec![0.0; n];
        let mut rank = 0;
        if r.ncols() > 0 && n > 0 {
            let sv = r.clone().singular_values();
            let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
            if sigma_max > 0.0 {
                let cutoff = tol.cutoff(sigma_max, r.nrows(), r.ncols());
                rank = sv.iter().filter(|&&s| s > cutoff).count();
            }
            for (slot, s) in eigenvalues.iter_mut().zip(sv.iter()) {
                *slot = s * s;
            }
            eigenvalues.sort_by(|a, b| a.total_cmp(b));
        }
        Self::assemble(w, rank, eigenvalues)
    }

    fn assemble(w: DMatrix<f64>, rank: usize, eigenvalues: Vec<f64>) -> Self {
        let n = w.nrows();
        let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);
        let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
        let trace_inverse = if n > 0 && rank == n && lambda_min > 0.0 {
            Some(eigenvalues.iter().map(|l| 1.0 / l).sum())
        } else {
            None
        };
        let rank = if rank == n && trace_inverse.is_none() { n.saturating_sub(1) } else { rank };
        Self {
            matrix: w,
            rank,
            trace_inverse,
            lambda_min,
            lambda_max,
            eigenvalues,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n()
    }

    /// Eigenvalues in ascending order (clamped at zero).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// `W_S = sum_{k=1}^{K} A^{k-1} B_{S_{K-k}} B_{S_{K-k}}^T (A^{k-1})^T`.
pub fn gramian(sys: &LinearSystem, schedule: &ActuatorSchedule, tol: RankTolerance) -> Result<GramianReport> {
    check_schedule(sys, schedule)?;
    let n = sys.n();
    let horizon = schedule.horizon();
    let mut w = DMatrix::zeros(n, n);
    let mut power = DMatrix::identity(n, n);
    for k in 1..=horizon {
        let set = schedule.set(horizon - k);
        if !set.is_empty() {
            let cols: Vec<usize> = set.iter().copied().collect();
            let block: DMatrix<f64> = &power * sys.b().select_columns(&cols);
            w += &block * block.transpose();
        }
        power = sys.a() * power;
    }
    let r = controllability_matrix(sys, schedule)?;
    Ok(GramianReport::from_factor(w, &r, tol))
}

/// Gramian of the unconstrained schedule (every actuator at every step).
pub fn full_gramian(sys: &LinearSystem, horizon: usize, tol: RankTolerance) -> Result<GramianReport> {
    gramian(sys, &ActuatorSchedule::full(horizon, sys.m()), tol)
}

/// Average energy `trace(W^{-1})` to reach a uniformly random unit-sphere target.
pub fn avg_energy(report: &GramianReport) -> Result<f64> {
    report.trace_inverse.ok_or(Error::NotControllable {
        rank: report.rank,
        n: report.n(),
    })
}

/// `trace((W + eps I)^{-1}) = sum_i 1/(lambda_i + eps) + (n - R)/eps`.
pub fn regularized_energy(w: &DMatrix<f64>, eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    if !w.is_square() {
        return Err(invalid("W must be square"));
    }
    Ok(sym_eigenvalues(w).into_iter().map(|l| 1.0 / (l.max(0.0) + eps)).sum())
}

/// Lower bound `lambda_min(W_base) / lambda_max(W_full)` on the
/// supermodularity ratio of the trace-inverse cost over supersets of the base
/// schedule.
pub fn alpha_lower_bound(base: &GramianReport, w_full: &GramianReport) -> Result<f64> {
    if !base.is_full_rank() || base.lambda_min <= 0.0 {
        return Err(Error::NotControllable {
            rank: base.rank,
            n: base.n(),
        });
    }
    if w_full.lambda_max <= 0.0 {
        return Err(invalid("full Gramian is zero"));
    }
    Ok(base.lambda_min / w_full.lambda_max)
}

/// Guarantee on the greedy schedule cost:
/// `(1 - beta) base_cost + beta optimum` with `beta = min(alpha/2, alpha/(1+alpha))`,
/// where `optimum` is the best cost over feasible supersets of the base schedule.
pub fn greedy_energy_bound(base_cost: f64, optimum: f64, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if optimum > base_cost * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "optimal cost {optimum} exceeds initial cost {base_cost}"
        )));
    }
    let beta = (alpha / 2.0).min(alpha / (1.0 + alpha));
    Ok((1.0 - beta) * base_cost + beta * optimum)
}
