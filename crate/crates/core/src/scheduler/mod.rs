//! Actuator and sensor scheduling.

pub mod greedy;
pub mod li;
pub mod sensor;

pub use greedy::{greedy_candidate_cost, rbn_greedy, GreedyRun};
pub use li::{
    controllable_schedule, controllable_schedule_traced, default_regularization, energy_aware_controllable_schedule,
    li_extension, LiIteration, LiScheduleRun, SpanBasis,
};
pub use sensor::{estimate_x0, observability_matrix, sensor_schedule, SensorSchedule};
