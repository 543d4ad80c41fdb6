//! Sensor schedules (the observability dual) and initial-state recovery.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{dims, invalid, Result};
use crate::linalg::{matrix_powers, min_norm_solve, RankTolerance};
use crate::system::LinearSystem;

use super::li::controllable_schedule;

/// Sensors read at each step `0..K~`, at most `budget` per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorSchedule {
    sets: Vec<BTreeSet<usize>>,
    budget: usize,
}

impl SensorSchedule {
    pub fn new(sets: Vec<BTreeSet<usize>>, budget: usize) -> Result<Self> {
        if sets.iter().any(|s| s.len() > budget) {
            return Err(invalid(format!("a step uses more than {budget} sensors")));
        }
        Ok(Self { sets, budget })
    }

    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn total_rows(&self) -> usize {
        self.sets.iter().map(BTreeSet::len).sum()
    }
}

/// Runs the controllable-schedule construction on `(A^T, C^T)`. Dual step
/// `t` pairs with `(A^T)^{K~-1-t}`, so it becomes sensor step `K~-1-t`.
pub fn sensor_schedule(sys: &LinearSystem, budget: usize, horizon: usize, tol: RankTolerance) -> Result<SensorSchedule> {
    let c = sys.c_required()?;
    let dual = LinearSystem::new(sys.a().transpose(), c.transpose(), None)?;
    let dual_schedule = controllable_schedule(&dual, budget, horizon, tol)?;
    let sets = dual_schedule.sets().iter().rev().cloned().collect();
    SensorSchedule::new(sets, budget)
}

/// Rows `C_i A^k` for every sensor `i` scheduled at step `k`.
pub fn observability_matrix(sys: &LinearSystem, schedule: &SensorSchedule) -> Result<DMatrix<f64>> {
    let c = sys.c_required()?;
    if schedule.sets().iter().flatten().any(|&i| i >= c.nrows()) {
        return Err(invalid("sensor index out of range"));
    }
    let powers = matrix_powers(sys.a(), schedule.horizon());
    let mut o = DMatrix::zeros(schedule.total_rows(), sys.n());
    let mut row = 0;
    for (k, set) in schedule.sets().iter().enumerate() {
        for &i in set {
            o.set_row(row, &(c.row(i) * &powers[k]));
            row += 1;
        }
    }
    Ok(o)
}

/// Least-squares estimate of `x(0)` from the scheduled measurements after
/// removing the response to the known inputs. `measurements[k]` is the full
/// `y(k)`; only the scheduled entries are used. An empty `inputs` slice
/// means no inputs were applied.
pub fn estimate_x0(
    sys: &LinearSystem,
    schedule: &SensorSchedule,
    measurements: &[DVector<f64>],
    inputs: &[DVector<f64>],
    tol: RankTolerance,
) -> Result<DVector<f64>> {
    let c = sys.c_required()?;
    let horizon = schedule.horizon();
    if measurements.len() < horizon {
        return Err(dims(format!(
            "need {horizon} measurement vectors, got {}",
            measurements.len()
        )));
    }
    if let Some(y) = measurements.iter().find(|y| y.len() != c.nrows()) {
        return Err(dims(format!("measurement of length {} but p = {}", y.len(), c.nrows())));
    }
    if !inputs.is_empty() && inputs.len() + 1 < horizon {
        return Err(dims(format!("need {} input vectors, got {}", horizon - 1, inputs.len())));
    }
    if inputs.iter().any(|u| u.len() != sys.m()) {
        return Err(dims(format!("inputs must have length {}", sys.m())));
    }

    let o = observability_matrix(sys, schedule)?;
    let mut rhs = DVector::zeros(o.nrows());
    let mut forced = DVector::zeros(sys.n());
    let mut row = 0;
    for (k, set) in schedule.sets().iter().enumerate() {
        let forced_y = c * &forced;
        for &i in set {
            rhs[row] = measurements[k][i] - forced_y[i];
            row += 1;
        }
        if let Some(u) = inputs.get(k) {
            forced = sys.step(&forced, u);
        } else {
            forced = sys.a() * forced;
        }
    }
    Ok(min_norm_solve(&o, &rhs, tol).0)
}
