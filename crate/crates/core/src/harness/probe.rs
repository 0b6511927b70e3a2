use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::ProbeConfig;
use super::seeds::{stream_rng, Stream};
use crate::autodiff::CriticNetwork;
use crate::env::{Pendulum, PendulumConfig, PendulumState};
use crate::error::{Error, Result};
use crate::geometry::{
    dominant_axis_selection, mixed_partial_landscape, JacobianReport, LandscapeConfig, LandscapeGrid, LipschitzReport,
    QuadraticCritic, QuadraticSpec,
};

/// Observation and action of the reference transition the landscape is centered on.
pub fn reference_point(env_cfg: &PendulumConfig, probe: &ProbeConfig) -> (Vec<f64>, Vec<f64>) {
    let mut env = Pendulum::new(env_cfg.clone());
    let obs = env
        .reset_to(PendulumState {
            theta: probe.reference_theta,
            theta_dot: probe.reference_theta_dot,
        })
        .observation;
    (obs, vec![probe.reference_action])
}

pub fn landscape_config(probe: &ProbeConfig) -> LandscapeConfig {
    LandscapeConfig {
        grid_n: probe.grid_points,
        fd_eps: probe.fd_eps,
        clip: probe.clip,
        ..LandscapeConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkProbe {
    pub axes: (usize, usize),
    pub grid: LandscapeGrid,
}

/// Landscape of `critic` around the reference point. Without `axes`, the
/// dominant pair of this critic is used; pass the axes found on a baseline
/// critic to compare several critics on the same slice.
pub fn probe_network(
    critic: &CriticNetwork,
    axes: Option<(usize, usize)>,
    env_cfg: &PendulumConfig,
    probe: &ProbeConfig,
) -> Result<NetworkProbe> {
    let (s0, a0) = reference_point(env_cfg, probe);
    let axes = match axes {
        Some(ax) => ax,
        None => dominant_axis_selection(critic, &s0, &a0, probe.fd_eps)?,
    };
    let grid = mixed_partial_landscape(critic, &s0, &a0, axes, &landscape_config(probe))?;
    Ok(NetworkProbe { axes, grid })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticProbe {
    pub jacobian: Vec<Vec<f64>>,
    pub m: f64,
    pub mu: f64,
    pub bound: f64,
    pub jacobian_norm: f64,
    pub pairs: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

impl QuadraticProbe {
    fn new(j: &JacobianReport, l: &LipschitzReport) -> Self {
        Self {
            jacobian: j.j.rows().into_iter().map(|r| r.to_vec()).collect(),
            m: j.m,
            mu: j.mu,
            bound: j.bound,
            jacobian_norm: j.j_norm,
            pairs: l.pairs,
            violations: l.violations,
            max_ratio: l.max_ratio,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Jacobian at the origin and a Lipschitz check over `n_pairs` state pairs
/// in the ball of `radius`.
pub fn probe_quadratic(spec: &QuadraticSpec, n_pairs: usize, radius: f64, seed: u64) -> Result<QuadraticProbe> {
    let q = QuadraticCritic::from_spec(spec)?;
    let j = q.implicit_policy_jacobian(&vec![0.0; q.state_dim()])?;
    let l = q.lipschitz_bound_check(n_pairs, radius, &mut stream_rng(seed, Stream::Probe))?;
    Ok(QuadraticProbe::new(&j, &l))
}

pub fn load_quadratic_spec(path: &Path) -> Result<QuadraticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
