//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the scheduling or Gramian code under test.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparsectl::experiment::{erdos_renyi_system, random_b, BDistribution};
use sparsectl::{ActuatorSchedule, LinearSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Consensus dynamics on an Erdos-Renyi graph driven by a Gaussian `B`.
pub fn er_system(n: usize, m: usize, seed: u64) -> LinearSystem {
    let a = erdos_renyi_system(n, seed).unwrap();
    let b = random_b(n, m, BDistribution::Gaussian, seed ^ 0x5bd1_e995).unwrap();
    LinearSystem::new(a, b, None).unwrap()
}

/// Rank from singular values with a cutoff `rel * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > rel * top).count()
}

/// `A^{K-k-1} B_j` by repeated multiplication.
pub fn column(sys: &LinearSystem, horizon: usize, (k, j): (usize, usize)) -> DVector<f64> {
    let mut c = sys.b().column(j).into_owned();
    for _ in 0..horizon - k - 1 {
        c = sys.a() * c;
    }
    c
}

pub fn pairs_of(schedule: &ActuatorSchedule) -> Vec<(usize, usize)> {
    schedule
        .sets()
        .iter()
        .enumerate()
        .flat_map(|(k, set)| set.iter().map(move |&j| (k, j)))
        .collect()
}

/// `sum c c^T` over the given pairs.
pub fn gram(sys: &LinearSystem, horizon: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> DMatrix<f64> {
    let n = sys.n();
    let mut w = DMatrix::zeros(n, n);
    for p in pairs {
        let c = column(sys, horizon, p);
        w += &c * c.transpose();
    }
    w
}

/// `trace(W^{-1})` through an LU inverse; `None` when `W` is numerically
/// singular.
pub fn trace_inverse(w: &DMatrix<f64>) -> Option<f64> {
    if rank(w, 1e-13) < w.nrows() {
        return None;
    }
    w.clone().lu().try_inverse().map(|inv| inv.trace())
}

pub fn schedule_trace_inverse(sys: &LinearSystem, schedule: &ActuatorSchedule) -> Option<f64> {
    trace_inverse(&gram(sys, schedule.horizon(), pairs_of(schedule)))
}

/// Every subset of `0..m` with at most `s` elements containing `base`.
fn supersets(m: usize, s: usize, base: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::new();
    for mask in 0u64..(1 << m) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let set: BTreeSet<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        if base.is_subset(&set) {
            out.push(set);
        }
    }
    out
}

/// Number of schedules enumerated by [`best_superset_energy`].
pub fn superset_count(m: usize, s: usize, base: &ActuatorSchedule) -> usize {
    base.sets().iter().map(|b| supersets(m, s, b).len()).product()
}

/// Minimum `trace(W^{-1})` over all schedules with at most `s` actuators per
/// step that contain `base`, by exhaustive enumeration.
pub fn best_superset_energy(sys: &LinearSystem, s: usize, base: &ActuatorSchedule) -> f64 {
    let horizon = base.horizon();
    let choices: Vec<Vec<BTreeSet<usize>>> = base.sets().iter().map(|b| supersets(sys.m(), s, b)).collect();
    let mut idx = vec![0usize; horizon];
    let mut best = f64::INFINITY;
    loop {
        let pairs = (0..horizon).flat_map(|k| choices[k][idx[k]].iter().map(move |&j| (k, j)));
        if let Some(e) = trace_inverse(&gram(sys, horizon, pairs)) {
            best = best.min(e);
        }
        let mut k = 0;
        loop {
            if k == horizon {
                return best;
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Steady filter equations evaluated with explicit inverses; returns the
/// Frobenius residuals of the prediction and update equations.
pub fn riccati_residuals(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    sigma_w: &DMatrix<f64>,
    p: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> (f64, f64) {
    let s_next = a * p * a.transpose() + sigma_v;
    let innov = (c * s * c.transpose() + sigma_w).lu().try_inverse().unwrap();
    let p_next = s - s * c.transpose() * innov * c * s;
    ((s_next - s).norm(), (p_next - p).norm())
}
