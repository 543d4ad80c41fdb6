//! Minimum-norm piecewise-sparse inputs and open-loop simulation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dims, Error, Result};
use crate::gramian::controllability_matrix;
use crate::linalg::{min_norm_solve, RankTolerance};
use crate::noisy::NoiseModel;
use crate::schedule::ActuatorSchedule;
use crate::system::LinearSystem;

/// Input sequence `u(0), ..., u(K-1)` whose step-k support lies in `S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSparseInput {
    inputs: Vec<DVector<f64>>,
    schedule: ActuatorSchedule,
}

impl PiecewiseSparseInput {
    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn schedule(&self) -> &ActuatorSchedule {
        &self.schedule
    }

    /// Stacked `[u(0); u(1); ...; u(K-1)]`.
    pub fn stacked(&self) -> DVector<f64> {
        let total: usize = self.inputs.iter().map(|u| u.len()).sum();
        DVector::from_iterator(total, self.inputs.iter().flat_map(|u| u.iter().copied()))
    }
}

/// Solves `x_f - A^K x_0 = R_S w` in the minimum-norm sense and spreads `w`
/// over the scheduled entries.
pub fn compute_inputs(
    sys: &LinearSystem,
    schedule: &ActuatorSchedule,
    x0: &DVector<f64>,
    xf: &DVector<f64>,
    tol: RankTolerance,
) -> Result<PiecewiseSparseInput> {
    let n = sys.n();
    if x0.len() != n || xf.len() != n {
        return Err(dims(format!("x0 and xf must have length {n}")));
    }
    let r = controllability_matrix(sys, schedule)?;
    let mut drift = x0.clone();
    for _ in 0..schedule.horizon() {
        drift = sys.a() * drift;
    }
    let rhs = xf - drift;
    let (w, rank) = min_norm_solve(&r, &rhs, tol);
    if rank < n {
        return Err(Error::NotControllable { rank, n });
    }
    let mut inputs = vec![DVector::zeros(sys.m()); schedule.horizon()];
    let mut col = 0;
    for (k, set) in schedule.sets().iter().enumerate() {
        for &j in set {
            inputs[k][j] = w[col];
            col += 1;
        }
    }
    Ok(PiecewiseSparseInput {
        inputs,
        schedule: schedule.clone(),
    })
}

/// State trajectory `x(0..=K)` and, when the system has `C`, the
/// measurements `y(0..=K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory always holds x(0)")
    }
}

/// Runs `x(k+1) = A x(k) + B u(k) (+ v(k))`, `y(k) = C x(k) (+ w(k))` for
/// as many steps as there are inputs. Noise draws come from a ChaCha stream
/// seeded with `seed`, so equal seeds give equal trajectories.
pub fn simulate(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    noise: Option<(&NoiseModel, u64)>,
) -> Result<Trajectory> {
    let n = sys.n();
    if x0.len() != n {
        return Err(dims(format!("x0 must have length {n}")));
    }
    if let Some((k, _)) = inputs.iter().enumerate().find(|(_, u)| u.len() != sys.m()) {
        return Err(dims(format!("u({k}) must have length {}", sys.m())));
    }
    if let Some((model, _)) = noise {
        if model.state_dim() != n {
            return Err(dims("Sigma_v does not match the state dimension"));
        }
        if let Some(c) = sys.c() {
            if model.measurement_dim() != c.nrows() {
                return Err(dims("Sigma_w does not match the measurement dimension"));
            }
        }
    }
    let mut rng = noise.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    let measure = |x: &DVector<f64>, rng: &mut Option<ChaCha8Rng>, c: &DMatrix<f64>| {
        let mut y = c * x;
        if let (Some((model, _)), Some(rng)) = (noise, rng.as_mut()) {
            y += model.sample_measurement(rng);
        }
        y
    };

    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut measurements = Vec::new();
    let mut x = x0.clone();
    for u in inputs {
        if let Some(c) = sys.c() {
            measurements.push(measure(&x, &mut rng, c));
        }
        let mut next = sys.step(&x, u);
        if let (Some((model, _)), Some(rng)) = (noise, rng.as_mut()) {
            next += model.sample_process(rng);
        }
        states.push(std::mem::replace(&mut x, next));
    }
    if let Some(c) = sys.c() {
        measurements.push(measure(&x, &mut rng, c));
    }
    states.push(x);
    Ok(Trajectory {
        states,
        measurements,
    })
}
