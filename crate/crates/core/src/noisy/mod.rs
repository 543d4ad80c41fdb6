//! Noisy systems: Kalman filtering, the steady-state Riccati solution, the
//! sparse tracking controller and its MSE envelope.

mod bounds;
mod kalman;
mod noise;
mod tracking;

pub use bounds::{mse_floor, mse_floor_transposed, mse_upper_bound, required_sparsity, MseBoundInputs};
pub use kalman::{kalman_step, steady_state_covariance, KalmanState, SteadyState};
pub use noise::NoiseModel;
pub use tracking::{steady_window, to_db, track, Regularizer, TrackConfig, TrackingRun};
