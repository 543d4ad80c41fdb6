//! Discrete-time linear system `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{dims, invalid, Result};
use crate::linalg::{ensure_finite, matrix_powers, rank_unchecked, RankTolerance};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: Option<DMatrix<f64>>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: Option<DMatrix<f64>>) -> Result<Self> {
        if !a.is_square() {
            return Err(dims(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        if b.nrows() != n {
            return Err(dims(format!("B must have {n} rows, got {}", b.nrows())));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        if let Some(c) = &c {
            if c.ncols() != n {
                return Err(dims(format!("C must have {n} columns, got {}", c.ncols())));
            }
            ensure_finite(c, "C")?;
        }
        Ok(Self { a, b, c })
    }

    pub fn with_measurement(mut self, c: DMatrix<f64>) -> Result<Self> {
        self = Self::new(self.a, self.b, Some(c))?;
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> Option<&DMatrix<f64>> {
        self.c.as_ref()
    }

    pub(crate) fn c_required(&self) -> Result<&DMatrix<f64>> {
        self.c
            .as_ref()
            .ok_or_else(|| invalid("system has no measurement matrix C"))
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of actuators.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of sensors (0 without C).
    pub fn p(&self) -> usize {
        self.c.as_ref().map_or(0, |c| c.nrows())
    }

    /// One noiseless step `A x + B u`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// The classical controllability matrix `[B, AB, ..., A^{n-1} B]`.
    pub fn krylov_controllability(&self) -> DMatrix<f64> {
        let n = self.n();
        let m = self.m();
        let mut r = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for i in 0..n {
            r.columns_mut(i * m, m).copy_from(&block);
            block = &self.a * block;
        }
        r
    }

    pub fn is_controllable(&self, tol: RankTolerance) -> bool {
        rank_unchecked(&self.krylov_controllability(), tol) == self.n()
    }
}

/// Degree of the minimal polynomial of `a`: the smallest d >= 1 for which
/// the vectorised powers `I, A, ..., A^d` are linearly dependent.
pub fn minimal_polynomial_degree(a: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    if !a.is_square() {
        return Err(dims("minimal polynomial needs a square matrix"));
    }
    ensure_finite(a, "A")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(0);
    }
    let powers = matrix_powers(a, n + 1);
    let mut stacked = DMatrix::zeros(n * n, n + 1);
    for (d, power) in powers.iter().enumerate() {
        // Column scaling does not change rank and keeps decaying powers visible.
        let norm = power.norm();
        let col = if norm > 0.0 { power / norm } else { power.clone() };
        stacked.column_mut(d).copy_from_slice(col.as_slice());
        if d >= 1 && rank_unchecked(&stacked.columns(0, d + 1).into_owned(), tol) < d + 1 {
            return Ok(d);
        }
    }
    // Cayley-Hamilton guarantees dependence at d = n; only rounding gets here.
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    ZeroSparsity,
    NotControllable,
    /// s < n - rank(A)
    SparsityBelowRankDeficit { deficit: usize },
}

/// Outcome of the s-sparse controllability test together with the bounds on
/// the minimum number of steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseControllability {
    pub feasible: bool,
    pub k_lower: usize,
    pub k_upper: usize,
    pub reason: Option<InfeasibleReason>,
    pub min_poly_degree: usize,
}

/// s-sparse controllability holds iff `(A, B)` is controllable and
/// `s >= n - rank(A)` (with s >= 1). The step bounds are
/// `ceil(n/s) <= K <= min(q ceil(rank(B)/s), n - s + 1)`.
///
/// Budgets above n are clamped to n for the bounds, since no step can use
/// more than n independent columns.
pub fn sparse_controllability_check(
    sys: &LinearSystem,
    s: usize,
    tol: RankTolerance,
) -> Result<SparseControllability> {
    if s > sys.m() {
        return Err(invalid(format!("sparsity {s} exceeds actuator count {}", sys.m())));
    }
    let n = sys.n();
    let q = minimal_polynomial_degree(sys.a(), tol)?;
    if s == 0 {
        return Ok(SparseControllability {
            feasible: false,
            k_lower: 0,
            k_upper: 0,
            reason: Some(InfeasibleReason::ZeroSparsity),
            min_poly_degree: q,
        });
    }
    let rank_a = rank_unchecked(sys.a(), tol);
    let rank_b = rank_unchecked(sys.b(), tol);
    let deficit = n - rank_a;
    let reason = if !sys.is_controllable(tol) {
        Some(InfeasibleReason::NotControllable)
    } else if s < deficit {
        Some(InfeasibleReason::SparsityBelowRankDeficit { deficit })
    } else {
        None
    };
    let s_eff = s.min(n.max(1));
    let k_lower = n.div_ceil(s_eff);
    let k_upper = (q * rank_b.div_ceil(s_eff)).min(n + 1 - s_eff);
    Ok(SparseControllability {
        feasible: reason.is_none(),
        k_lower,
        k_upper,
        reason,
        min_poly_degree: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn rejects_bad_shapes() {
        let a = DMatrix::zeros(2, 3);
        assert!(LinearSystem::new(a, DMatrix::zeros(2, 1), None).is_err());
        let a = DMatrix::identity(2, 2);
        assert!(LinearSystem::new(a.clone(), DMatrix::zeros(3, 1), None).is_err());
        assert!(LinearSystem::new(a.clone(), DMatrix::zeros(2, 1), Some(DMatrix::zeros(1, 3))).is_err());
        let mut b = DMatrix::zeros(2, 1);
        b[0] = f64::INFINITY;
        assert!(LinearSystem::new(a, b, None).is_err());
    }

    #[test]
    fn minimal_polynomial_examples() {
        let tol = RankTolerance::default();
        assert_eq!(minimal_polynomial_degree(&DMatrix::identity(4, 4), tol).unwrap(), 1);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(minimal_polynomial_degree(&d, tol).unwrap(), 2);
        assert_eq!(minimal_polynomial_degree(&shift3(), tol).unwrap(), 3);
        assert_eq!(minimal_polynomial_degree(&DMatrix::zeros(3, 3), tol).unwrap(), 1);
    }

    #[test]
    fn sparse_check_identity() {
        let sys = LinearSystem::new(DMatrix::identity(4, 4), DMatrix::identity(4, 4), None).unwrap();
        let r = sparse_controllability_check(&sys, 2, RankTolerance::default()).unwrap();
        assert!(r.feasible);
        assert_eq!((r.k_lower, r.k_upper), (2, 2));
    }

    #[test]
    fn sparse_check_zero_budget() {
        let sys = LinearSystem::new(DMatrix::identity(3, 3), DMatrix::identity(3, 3), None).unwrap();
        let r = sparse_controllability_check(&sys, 0, RankTolerance::default()).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.reason, Some(InfeasibleReason::ZeroSparsity));
    }

    #[test]
    fn sparse_check_nilpotent() {
        let sys = LinearSystem::new(shift3(), DMatrix::identity(3, 3), None).unwrap();
        let r = sparse_controllability_check(&sys, 1, RankTolerance::default()).unwrap();
        assert!(r.feasible);
        assert!(r.k_lower <= r.k_upper);
    }

    #[test]
    fn sparse_check_rank_deficit() {
        // A = 0 has rank 0, so a 1-sparse budget cannot control a 2-state system.
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), None).unwrap();
        let r = sparse_controllability_check(&sys, 1, RankTolerance::default()).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.reason, Some(InfeasibleReason::SparsityBelowRankDeficit { deficit: 2 }));
    }

    #[test]
    fn sparse_check_uncontrollable() {
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let sys = LinearSystem::new(DMatrix::identity(2, 2), b, None).unwrap();
        let r = sparse_controllability_check(&sys, 1, RankTolerance::default()).unwrap();
        assert_eq!(r.reason, Some(InfeasibleReason::NotControllable));
    }
}
