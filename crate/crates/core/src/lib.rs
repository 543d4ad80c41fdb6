//! Sparse time-varying actuator scheduling for discrete-time linear systems.
//!
//! Builds schedules that keep `x(k+1) = A x(k) + B u(k)` controllable when
//! each `u(k)` may use at most `s` actuators, refines them greedily to lower
//! the average control energy `trace(W^{-1})`, synthesises minimum-norm
//! inputs, and runs a Kalman filter plus OMP tracking loop for noisy systems.

pub mod control;
pub mod error;
pub mod experiment;
pub mod gramian;
pub mod linalg;
pub mod noisy;
pub mod recovery;
pub mod schedule;
pub mod scheduler;
pub mod system;

pub use control::{compute_inputs, simulate, PiecewiseSparseInput, Trajectory};
pub use error::{Error, Precondition, Result};
pub use gramian::{
    alpha_lower_bound, avg_energy, controllability_matrix, full_gramian, gramian, greedy_energy_bound,
    regularized_energy, GramianReport,
};
pub use linalg::{numerical_rank, spectral_norm, RankTolerance};
pub use schedule::{ActuatorSchedule, SelectionSet};
pub use system::{
    minimal_polynomial_degree, sparse_controllability_check, InfeasibleReason, LinearSystem, SparseControllability,
};
