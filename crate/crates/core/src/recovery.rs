//! Orthogonal matching pursuit and the worst-case OMP decay factor of a
//! dictionary.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::{rank_unchecked, RankTolerance};

/// Output of [`omp`].
#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub coefficients: DVector<f64>,
    /// Atoms in the order they were selected.
    pub support: Vec<usize>,
    /// `||r_t||` for `t = 0, 1, ...`, starting with `||target||`.
    pub residual_norms: Vec<f64>,
    /// `max_j |B_j^T r_t| / (||B_j|| ||r_t||)` at every selection step.
    pub max_correlations: Vec<f64>,
}

impl OmpResult {
    pub fn residual_norm(&self) -> f64 {
        *self.residual_norms.last().expect("residual_norms holds ||target||")
    }
}

/// Greedy `s`-sparse approximation of `target` over the columns of `dict`.
/// Picks the column most correlated with the residual (lowest index on ties),
/// refits by least squares on the support via an incrementally grown
/// orthonormal basis, and stops after `s` atoms or once
/// `||r|| <= tol * ||target||`. Zero columns are never picked.
pub fn omp(dict: &DMatrix<f64>, target: &DVector<f64>, s: usize, tol: f64) -> Result<OmpResult> {
    let (n, m) = dict.shape();
    if target.len() != n {
        return Err(invalid(format!("target has length {}, dictionary has {n} rows", target.len())));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(invalid("tolerance must be >= 0"));
    }
    let norms: Vec<f64> = dict.column_iter().map(|c| c.norm()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(invalid("dictionary has no nonzero column"));
    }
    let zero_cut = scale * 1e-14;

    let target_norm = target.norm();
    let stop_at = tol * target_norm;
    let mut q: Vec<DVector<f64>> = Vec::new();
    // Upper-triangular factor: column t holds Q^T B_{support[t]}.
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut support = Vec::new();
    let mut residual = target.clone();
    let mut residual_norms = vec![target_norm];
    let mut max_correlations = Vec::new();
    let mut chosen = vec![false; m];
    let li_cut = RankTolerance::default();

    while support.len() < s.min(n) && residual.norm() > stop_at {
        let rn = residual.norm();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if chosen[j] || norms[j] <= zero_cut {
                continue;
            }
            let corr = dict.column(j).dot(&residual).abs() / norms[j];
            // Strict comparison keeps the lowest index on ties.
            if best.is_none_or(|(_, c)| corr > c) {
                best = Some((j, corr));
            }
        }
        let Some((j, corr)) = best else { break };
        let column = dict.column(j).into_owned();
        let mut v = column.clone();
        let mut coeffs = Vec::with_capacity(q.len() + 1);
        for qi in &q {
            coeffs.push(qi.dot(&v));
        }
        for (qi, c) in q.iter().zip(&coeffs) {
            v.axpy(-c, qi, 1.0);
        }
        for (qi, c) in q.iter().zip(coeffs.iter_mut()) {
            let again = qi.dot(&v);
            v.axpy(-again, qi, 1.0);
            *c += again;
        }
        let vn = v.norm();
        if vn <= li_cut.cutoff(norms[j], n, 1) {
            // Residual is orthogonal to the span, so nothing can improve it.
            break;
        }
        coeffs.push(vn);
        q.push(v / vn);
        r_cols.push(coeffs);
        support.push(j);
        chosen[j] = true;
        max_correlations.push(corr / rn);

        let last = q.last().expect("just pushed");
        let proj = last.dot(&residual);
        residual.axpy(-proj, last, 1.0);
        residual_norms.push(residual.norm());
    }

    // Solve R c = Q^T target by back substitution.
    let t = support.len();
    let rhs: Vec<f64> = q.iter().map(|qi| qi.dot(target)).collect();
    let mut c = vec![0.0; t];
    for row in (0..t).rev() {
        let mut acc = rhs[row];
        for (col, r_col) in r_cols.iter().enumerate().skip(row + 1) {
            acc -= r_col[row] * c[col];
        }
        c[row] = acc / r_cols[row][row];
    }
    let mut u = DVector::zeros(m);
    for (&j, &cj) in support.iter().zip(&c) {
        u[j] = cj;
    }
    Ok(OmpResult {
        coefficients: u,
        support,
        residual_norms,
        max_correlations,
    })
}

/// How a [`DecayFactorEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMethod {
    Analytic,
    Sampled,
}

/// Estimate of `xi(B) = 1 - inf_{||v||=1} max_j (b_j^T v)^2 / ||b_j||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFactorEstimate {
    pub value: f64,
    pub method: DecayMethod,
    pub samples: usize,
    /// Sampling can only overestimate the infimum, so a sampled value is
    /// never above the true factor.
    pub is_lower_estimate: bool,
}

pub const DEFAULT_DECAY_SAMPLES: usize = 10_000;
const DESCENT_STARTS: usize = 10;
const DESCENT_STEPS: usize = 50;
const CHUNK: usize = 1_000;

fn normalized_columns(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = b.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(invalid("decay factor needs nonzero columns"));
        }
        col /= norm;
    }
    Ok(out)
}

/// Drops columns parallel to an earlier one; they never change the max.
fn distinct_directions(normalized: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for col in normalized.column_iter() {
        if !kept.iter().any(|k| (k.dot(&col).abs() - 1.0).abs() < 1e-12) {
            kept.push(col.into_owned());
        }
    }
    kept
}

fn max_sq_correlation(dirs: &DMatrix<f64>, v: &DVector<f64>) -> (f64, usize) {
    let corr = dirs.tr_mul(v);
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, c) in corr.iter().enumerate() {
        if c * c > best.0 {
            best = (c * c, j);
        }
    }
    best
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let norm: f64 = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Projected subgradient descent on `max_j (b_j^T v)^2` over the sphere.
fn descend(dirs: &DMatrix<f64>, start: DVector<f64>) -> f64 {
    let mut v = start;
    let (mut best, _) = max_sq_correlation(dirs, &v);
    for step in 0..DESCENT_STEPS {
        let (_, j) = max_sq_correlation(dirs, &v);
        let b = dirs.column(j);
        let c = b.dot(&v);
        let mut grad = b * (2.0 * c);
        grad.axpy(-grad.dot(&v), &v.clone(), 1.0);
        let gn = grad.norm();
        if gn < 1e-15 {
            break;
        }
        let rate = 0.2 / ((step + 1) as f64).sqrt();
        v -= grad * (rate / gn);
        v /= v.norm();
        best = best.min(max_sq_correlation(dirs, &v).0);
    }
    best
}

/// Analytic when the distinct normalised columns are an orthonormal basis
/// (`1 - 1/n`) or do not span (`1`); otherwise a seeded search over
/// `sample_budget` random unit vectors refined by local descent.
pub fn decay_factor(b: &DMatrix<f64>, sample_budget: usize, seed: u64) -> Result<DecayFactorEstimate> {
    let n = b.nrows();
    if n == 0 || b.ncols() == 0 {
        return Err(invalid("decay factor needs a nonempty dictionary"));
    }
    let normalized = normalized_columns(b)?;
    let analytic = |value| DecayFactorEstimate {
        value,
        method: DecayMethod::Analytic,
        samples: 0,
        is_lower_estimate: false,
    };
    if rank_unchecked(&normalized, RankTolerance::default()) < n {
        return Ok(analytic(1.0));
    }
    let dirs = distinct_directions(&normalized);
    let dirs = DMatrix::from_columns(&dirs);
    if dirs.ncols() == n && (dirs.tr_mul(&dirs) - DMatrix::identity(n, n)).abs().max() < 1e-10 {
        return Ok(analytic(1.0 - 1.0 / n as f64));
    }
    if sample_budget == 0 {
        return Err(invalid("sample budget must be positive for a non-orthogonal dictionary"));
    }

    let chunks = sample_budget.div_ceil(CHUNK);
    let mut scored: Vec<(f64, usize)> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(sample_budget - chunk * CHUNK);
            let dirs = &dirs;
            (0..count).map(move |i| {
                let v = random_unit(n, &mut rng);
                (max_sq_correlation(dirs, &v).0, chunk * CHUNK + i)
            })
        })
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let starts: Vec<usize> = scored.iter().take(DESCENT_STARTS).map(|&(_, i)| i).collect();
    let regenerate = |index: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((index / CHUNK) as u64);
        let mut v = random_unit(n, &mut rng);
        for _ in 0..index % CHUNK {
            v = random_unit(n, &mut rng);
        }
        v
    };
    let refined = starts
        .par_iter()
        .map(|&i| descend(&dirs, regenerate(i)))
        .reduce(|| f64::INFINITY, f64::min);
    let inf = scored[0].0.min(refined).clamp(0.0, 1.0);
    Ok(DecayFactorEstimate {
        value: 1.0 - inf,
        method: DecayMethod::Sampled,
        samples: sample_budget,
        is_lower_estimate: true,
    })
}
