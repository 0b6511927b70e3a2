//! Implicit policy Jacobian and Lipschitz checks on analytic quadratic
//! critics, plus mixed-partial landscape scans that work on both quadratic
//! and network critics.

mod landscape;
pub mod linalg;
mod quadratic;

pub use landscape::{dominant_axis_selection, mixed_partial_landscape, LandscapeConfig, LandscapeGrid};
pub use linalg::{max_eigenvalue, solve_spd, spectral_norm, symmetric_eigen};
pub use quadratic::{JacobianReport, LipschitzReport, QuadraticCritic, QuadraticSpec};

use crate::autodiff::CriticNetwork;
use crate::error::Result;

/// Point-wise value and action-gradient access shared by analytic and
/// network critics.
pub trait ActionValue {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn value(&self, s: &[f64], a: &[f64]) -> Result<f64>;
    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>>;
}

impl ActionValue for CriticNetwork {
    fn state_dim(&self) -> usize {
        CriticNetwork::state_dim(self)
    }

    fn action_dim(&self) -> usize {
        CriticNetwork::action_dim(self)
    }

    fn value(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        self.forward(s, a)
    }

    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        CriticNetwork::action_gradient(self, s, a)
    }
}
