//! Schedules that guarantee controllability by accumulating linearly
//! independent columns of `A^{K-1} B, A^{K-2} B, ..., B`, at most `s` per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Precondition, Result};
use crate::linalg::{matrix_powers, rank_unchecked, RankTolerance};
use crate::schedule::{ActuatorSchedule, SelectionSet};
use crate::system::LinearSystem;

/// Orthonormal basis of the span of the columns accepted so far.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanBasis {
    dim: usize,
    vectors: Vec<DVector<f64>>,
}

impl SpanBasis {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// Component of `c` orthogonal to the span (two Gram-Schmidt passes).
    pub fn residual(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut r = c.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        r
    }

    /// Normalised residual of `c` if it extends the span, i.e. the residual
    /// norm exceeds the tolerance scaled by `||c||`.
    pub fn extension(&self, c: &DVector<f64>, tol: RankTolerance) -> Option<DVector<f64>> {
        if self.vectors.len() >= self.dim {
            return None;
        }
        let norm = c.norm();
        if norm == 0.0 {
            return None;
        }
        let r = self.residual(c);
        let rn = r.norm();
        (rn > tol.cutoff(norm, self.dim, 1)).then(|| r / rn)
    }

    /// Adds `c` to the span if it is independent; returns whether it was added.
    pub fn try_push(&mut self, c: &DVector<f64>, tol: RankTolerance) -> bool {
        match self.extension(c, tol) {
            Some(q) => {
                self.vectors.push(q);
                true
            }
            None => false,
        }
    }
}

/// Indices of up to `limit` candidate columns that successively extend the
/// span of `basis`, in the order [`controllable_schedule`] would take them.
pub fn li_extension(basis: &SpanBasis, candidates: &DMatrix<f64>, limit: usize, tol: RankTolerance) -> Vec<usize> {
    let mut work = basis.clone();
    let mut remaining: Vec<(usize, DVector<f64>)> =
        candidates.column_iter().enumerate().map(|(j, c)| (j, c.into_owned())).collect();
    let mut picked = Vec::new();
    while picked.len() < limit {
        let Some(pos) = MostIndependent.pick(&work, &remaining, tol) else {
            break;
        };
        let (j, column) = remaining.remove(pos);
        work.try_push(&column, tol);
        picked.push(j);
    }
    picked
}

/// Bookkeeping for one iteration `i` of the construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiIteration {
    /// Power of A whose columns were offered (`A^i B`).
    pub power: usize,
    /// `rank(A^i B)`.
    pub rank_block: usize,
    /// `|T^{(i+1)}|`
    pub selected_before: usize,
    /// `l(i) = min(s, rank(A^i B) - |T^{(i+1)}|)`.
    pub limit: usize,
    /// `|T^{(i)}|`
    pub selected_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiScheduleRun {
    pub schedule: ActuatorSchedule,
    pub selection: SelectionSet,
    pub iterations: Vec<LiIteration>,
}

pub(crate) fn check_preconditions(
    input_rank: usize,
    rank_a: usize,
    n: usize,
    s: usize,
    horizon: usize,
) -> Result<()> {
    if input_rank != n {
        return Err(Error::Precondition(Precondition::FullRowRank { rank: input_rank, n }));
    }
    let required = 1.max(n - rank_a);
    if s < required {
        return Err(Error::Precondition(Precondition::SparsityTooSmall { s, required }));
    }
    let required = n.div_ceil(s);
    if horizon < required {
        return Err(Error::Precondition(Precondition::HorizonTooShort { k: horizon, required }));
    }
    Ok(())
}

/// Picks the next column among `candidates` for the step. Plain
/// construction takes the column with the largest relative residual against
/// the current span; the energy-aware one minimises the regularised trace.
trait ColumnPicker {
    fn pick(&mut self, basis: &SpanBasis, candidates: &[(usize, DVector<f64>)], tol: RankTolerance) -> Option<usize>;
    fn accepted(&mut self, _column: &DVector<f64>) {}
}

/// Column pivoting: any independent column satisfies the construction, and
/// taking the least aligned one keeps `R_S` well conditioned. Residuals within
/// a relative `1e-12` count as tied and go to the lowest index.
struct MostIndependent;

impl ColumnPicker for MostIndependent {
    fn pick(&mut self, basis: &SpanBasis, candidates: &[(usize, DVector<f64>)], tol: RankTolerance) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        if basis.rank() >= basis.dim() {
            return None;
        }
        for (pos, (_, c)) in candidates.iter().enumerate() {
            let norm = c.norm();
            let rn = basis.residual(c).norm();
            if norm == 0.0 || rn <= tol.cutoff(norm, basis.dim(), 1) {
                continue;
            }
            let score = rn / norm;
            match best {
                Some((_, b)) if score <= b * (1.0 + 1e-12) => {}
                _ => best = Some((pos, score)),
            }
        }
        best.map(|(pos, _)| pos)
    }
}

/// Tracks `(W + eps I)^{-1}` with rank-one updates.
struct RegularizedEnergy {
    inverse: DMatrix<f64>,
}

impl ColumnPicker for RegularizedEnergy {
    fn pick(&mut self, basis: &SpanBasis, candidates: &[(usize, DVector<f64>)], tol: RankTolerance) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (pos, (_, c)) in candidates.iter().enumerate() {
            if basis.extension(c, tol).is_none() {
                continue;
            }
            let cost = super::greedy::greedy_candidate_cost(&self.inverse, c);
            match best {
                Some((_, b)) if cost >= b - 1e-12 * b.abs() => {}
                _ => best = Some((pos, cost)),
            }
        }
        best.map(|(pos, _)| pos)
    }

    fn accepted(&mut self, c: &DVector<f64>) {
        let mc = &self.inverse * c;
        let denom = 1.0 + c.dot(&mc);
        self.inverse -= (&mc * mc.transpose()) / denom;
    }
}

fn run_construction(
    sys: &LinearSystem,
    s: usize,
    horizon: usize,
    tol: RankTolerance,
    picker: &mut dyn ColumnPicker,
) -> Result<LiScheduleRun> {
    let n = sys.n();
    let rank_b = rank_unchecked(sys.b(), tol);
    let rank_a = rank_unchecked(sys.a(), tol);
    check_preconditions(rank_b, rank_a, n, s, horizon)?;

    let powers = matrix_powers(sys.a(), horizon);
    let mut basis = SpanBasis::new(n);
    let mut selection = SelectionSet::new(horizon);
    let mut iterations = Vec::new();

    for i in (0..horizon).rev() {
        if basis.rank() == n {
            break;
        }
        let k = horizon - 1 - i;
        let block = &powers[i] * sys.b();
        let rank_block = rank_unchecked(&block, tol);
        let selected_before = basis.rank();
        let limit = s.min(rank_block.saturating_sub(selected_before));

        let mut candidates: Vec<(usize, DVector<f64>)> =
            block.column_iter().enumerate().map(|(j, c)| (j, c.into_owned())).collect();
        for _ in 0..limit {
            let Some(pos) = picker.pick(&basis, &candidates, tol) else {
                break;
            };
            let (j, column) = candidates.remove(pos);
            basis.try_push(&column, tol);
            picker.accepted(&column);
            selection.insert((k, j));
        }
        iterations.push(LiIteration {
            power: i,
            rank_block,
            selected_before,
            limit,
            selected_after: basis.rank(),
        });
    }

    let schedule = selection.to_schedule(s)?;
    Ok(LiScheduleRun {
        schedule,
        selection,
        iterations,
    })
}

/// Controllable s-sparse schedule with exactly n selected pairs (when the
/// full-row-rank and sparsity hypotheses hold). Within each step the least
/// aligned independent column is taken first; ties go to the lowest actuator.
pub fn controllable_schedule(sys: &LinearSystem, s: usize, horizon: usize, tol: RankTolerance) -> Result<ActuatorSchedule> {
    controllable_schedule_traced(sys, s, horizon, tol).map(|run| run.schedule)
}

/// Same as [`controllable_schedule`], also returning per-iteration counts.
pub fn controllable_schedule_traced(
    sys: &LinearSystem,
    s: usize,
    horizon: usize,
    tol: RankTolerance,
) -> Result<LiScheduleRun> {
    run_construction(sys, s, horizon, tol, &mut MostIndependent)
}

/// `1e-6 * trace(B B^T) / n`, i.e. a millionth of the average Gramian
/// diagonal contributed by one step of every actuator.
pub fn default_regularization(sys: &LinearSystem) -> f64 {
    let n = sys.n().max(1) as f64;
    let scale = sys.b().norm_squared() / n;
    if scale > 0.0 {
        1e-6 * scale
    } else {
        1e-6
    }
}

/// Controllable schedule whose independent columns are chosen one at a time
/// to minimise `trace((W + eps I)^{-1})`.
pub fn energy_aware_controllable_schedule(
    sys: &LinearSystem,
    s: usize,
    horizon: usize,
    eps: Option<f64>,
    tol: RankTolerance,
) -> Result<LiScheduleRun> {
    let eps = eps.unwrap_or_else(|| default_regularization(sys));
    if !eps.is_finite() || eps <= 0.0 {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let n = sys.n();
    let mut picker = RegularizedEnergy {
        inverse: DMatrix::identity(n, n) / eps,
    };
    run_construction(sys, s, horizon, tol, &mut picker)
}
