//! Pendulum swing-up task and observation-noise wrapper.

mod noise;
mod pendulum;
mod trajectory;

pub use noise::{estimate_sigma_base, noisy_observe, NoiseWrapperConfig};
pub use pendulum::{wrap_angle, Pendulum, PendulumConfig, PendulumState, StepResult, ACTION_DIM, OBS_DIM};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, TrajectoryRow};
