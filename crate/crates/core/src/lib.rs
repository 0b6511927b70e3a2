//! Critic-side geometric regularization for TD3 on continuous control.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: eager computation graph with reverse-over-reverse support,
//!   dense SiLU critics and tanh-squashed actors.
//! - [`env`]: pendulum swing-up and the scale-aware observation-noise wrapper.
//! - [`td3`]: replay buffer, Adam, and the twin-critic agent whose critic
//!   step accepts auxiliary losses.
//! - [`regularizers`]: mixed-partial, vector-field-consistency and curvature
//!   losses.
//! - [`geometry`]: quadratic critics, implicit policy Jacobian, Lipschitz
//!   checks and mixed-partial landscape scans.
//! - [`metrics`]: radix-2 FFT and spectral smoothness score.
//! - [`harness`]: configuration, seeding, training, evaluation, sweeps,
//!   ablations and probes.

pub mod autodiff;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod regularizers;
pub mod td3;

pub use error::{Error, Result};
