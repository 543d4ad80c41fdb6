//! Greedy augmentation of a controllable schedule to minimise `trace(W^{-1})`
//! under the per-step sparsity budget.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gramian::{gramian, pair_column};
use crate::linalg::{matrix_powers, spd_inverse, RankTolerance};
use crate::schedule::{ActuatorSchedule, SelectionSet};
use crate::system::LinearSystem;

/// Accepted columns between fresh re-inversions of W.
const REFRESH_EVERY: usize = 50;

/// `trace((W + c c^T)^{-1}) = trace(W^{-1}) - ||W^{-1} c||^2 / (1 + c^T W^{-1} c)`.
pub fn greedy_candidate_cost(w_inv: &DMatrix<f64>, column: &DVector<f64>) -> f64 {
    let wc = w_inv * column;
    w_inv.trace() - wc.norm_squared() / (1.0 + column.dot(&wc))
}

/// Result of the greedy augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRun {
    pub schedule: ActuatorSchedule,
    pub selection: SelectionSet,
    /// Pairs in the order they were added.
    pub added: Vec<(usize, usize)>,
    /// `trace(W^{-1})` of the initial schedule followed by the value after
    /// every accepted pair.
    pub costs: Vec<f64>,
}

struct GreedyState {
    selected: SelectionSet,
    pool: Vec<(usize, usize)>,
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    since_refresh: usize,
}

impl GreedyState {
    fn accept(&mut self, pair: (usize, usize), column: &DVector<f64>, s: usize) -> Result<()> {
        self.selected.insert(pair);
        self.w += column * column.transpose();
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.w_inv = spd_inverse(&self.w)?;
            self.since_refresh = 0;
        } else {
            let wc = &self.w_inv * column;
            let denom = 1.0 + column.dot(&wc);
            self.w_inv -= (&wc * wc.transpose()) / denom;
        }
        let k = pair.0;
        if self.selected.count_at(k) >= s {
            self.pool.retain(|&(kk, _)| kk != k);
        } else {
            self.pool.retain(|&p| p != pair);
        }
        Ok(())
    }
}

/// Adds one pair at a time, always the feasible pair giving the smallest
/// `trace(W^{-1})` (lowest `(k, j)` on ties), until every step is saturated.
pub fn rbn_greedy(
    sys: &LinearSystem,
    s: usize,
    horizon: usize,
    initial: &ActuatorSchedule,
    tol: RankTolerance,
) -> Result<GreedyRun> {
    if initial.horizon() != horizon {
        return Err(invalid(format!(
            "initial schedule has horizon {}, expected {horizon}",
            initial.horizon()
        )));
    }
    let start = initial.to_selection();
    if !start.is_feasible(s) {
        return Err(invalid("initial schedule violates the sparsity budget"));
    }
    let report = gramian(sys, initial, tol)?;
    if !report.is_full_rank() {
        return Err(Error::NotControllable {
            rank: report.rank,
            n: sys.n(),
        });
    }
    let w_inv = spd_inverse(&report.matrix)?;

    let m = sys.m();
    let powers = matrix_powers(sys.a(), horizon);
    let columns: Vec<Vec<DVector<f64>>> = (0..horizon)
        .map(|k| (0..m).map(|j| pair_column(sys, &powers, horizon, k, j)).collect())
        .collect();

    let pool = (0..horizon)
        .filter(|&k| start.count_at(k) < s)
        .flat_map(|k| (0..m).map(move |j| (k, j)))
        .filter(|&p| !start.contains(p))
        .collect();

    let mut state = GreedyState {
        selected: start,
        pool,
        w: report.matrix.clone(),
        w_inv,
        since_refresh: 0,
    };
    let mut costs = vec![state.w_inv.trace()];
    let mut added = Vec::new();

    while !state.pool.is_empty() {
        let w_inv = &state.w_inv;
        let scored: Vec<f64> = state
            .pool
            .par_iter()
            .map(|&(k, j)| greedy_candidate_cost(w_inv, &columns[k][j]))
            .collect();
        // Pool is kept in (k, j) order, so the first minimum is the lowest pair.
        let mut best = 0;
        for (idx, &cost) in scored.iter().enumerate().skip(1) {
            let incumbent = scored[best];
            if cost < incumbent - 1e-12 * incumbent.abs() {
                best = idx;
            }
        }
        let pair = state.pool[best];
        state.accept(pair, &columns[pair.0][pair.1], s)?;
        added.push(pair);
        costs.push(state.w_inv.trace());
    }

    let schedule = state.selected.to_schedule(s)?;
    Ok(GreedyRun {
        schedule,
        selection: state.selected,
        added,
        costs,
    })
}
