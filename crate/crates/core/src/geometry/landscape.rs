use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ActionValue;
use crate::autodiff::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Offsets swept along the chosen state axis, relative to the reference state.
    pub state_range: (f64, f64),
    /// Offsets swept along the chosen action axis, relative to the reference action.
    pub action_range: (f64, f64),
    pub grid_n: usize,
    pub fd_eps: f64,
    pub clip: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            state_range: (-1.0, 1.0),
            action_range: (-1.5, 1.5),
            grid_n: 41,
            fd_eps: 1e-3,
            clip: 300.0,
        }
    }
}

/// Clipped mixed-partial norms over a two-axis sweep.
///
/// `values[[r, c]]` belongs to `state_axis[r]` and `action_axis[c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeGrid {
    pub axes: (usize, usize),
    pub state_axis: Vec<f64>,
    pub action_axis: Vec<f64>,
    pub values: Matrix,
    pub clip_value: f64,
}

impl LandscapeGrid {
    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Header row holds action-axis values, first column the state-axis values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![format!("s{}\\a{}", self.axes.0, self.axes.1)];
        header.extend(self.action_axis.iter().map(|v| format!("{v:?}")));
        w.write_record(&header)?;
        for (r, s) in self.state_axis.iter().enumerate() {
            let mut row = vec![format!("{s:?}")];
            row.extend(self.values.row(r).iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `(grad_a Q(s + eps e_i, a) - grad_a Q(s, a)) / eps`.
fn fd_mixed_column(critic: &dyn ActionValue, s: &[f64], a: &[f64], i: usize, eps: f64) -> Result<Vec<f64>> {
    let base = critic.action_gradient(s, a)?;
    let mut shifted = s.to_vec();
    shifted[i] += eps;
    let moved = critic.action_gradient(&shifted, a)?;
    Ok(moved.iter().zip(&base).map(|(m, b)| (m - b) / eps).collect())
}

fn check_reference(critic: &dyn ActionValue, s0: &[f64], a0: &[f64]) -> Result<()> {
    if s0.len() != critic.state_dim() {
        return Err(Error::Dimension {
            what: "reference state",
            expected: critic.state_dim(),
            got: s0.len(),
        });
    }
    if a0.len() != critic.action_dim() {
        return Err(Error::Dimension {
            what: "reference action",
            expected: critic.action_dim(),
            got: a0.len(),
        });
    }
    Ok(())
}

/// Sweep state axis `i` and action axis `j` around `(s0, a0)` and record the
/// finite-difference norm of the mixed partial along `e_i`, clipped at `cfg.clip`.
pub fn mixed_partial_landscape(
    critic: &dyn ActionValue,
    s0: &[f64],
    a0: &[f64],
    axes: (usize, usize),
    cfg: &LandscapeConfig,
) -> Result<LandscapeGrid> {
    check_reference(critic, s0, a0)?;
    let (i, j) = axes;
    if i >= s0.len() || j >= a0.len() {
        return Err(Error::InvalidArgument(format!(
            "axes ({i}, {j}) out of range for k={}, d={}",
            s0.len(),
            a0.len()
        )));
    }
    if cfg.grid_n == 0 || !(cfg.fd_eps > 0.0) || !(cfg.clip > 0.0) {
        return Err(Error::InvalidArgument("landscape needs grid_n >= 1, fd_eps > 0, clip > 0".into()));
    }
    let state_axis: Vec<f64> = linspace(cfg.state_range.0, cfg.state_range.1, cfg.grid_n)
        .into_iter()
        .map(|x| s0[i] + x)
        .collect();
    let action_axis: Vec<f64> = linspace(cfg.action_range.0, cfg.action_range.1, cfg.grid_n)
        .into_iter()
        .map(|y| a0[j] + y)
        .collect();
    let mut values = Array2::zeros((state_axis.len(), action_axis.len()));
    let mut s = s0.to_vec();
    let mut a = a0.to_vec();
    for (r, &sv) in state_axis.iter().enumerate() {
        s[i] = sv;
        for (c, &av) in action_axis.iter().enumerate() {
            a[j] = av;
            let col = fd_mixed_column(critic, &s, &a, i, cfg.fd_eps)?;
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            values[[r, c]] = if norm.is_nan() { cfg.clip } else { norm.min(cfg.clip) };
        }
    }
    Ok(LandscapeGrid {
        axes,
        state_axis,
        action_axis,
        values,
        clip_value: cfg.clip,
    })
}

/// The `(state, action)` index pair with the largest finite-difference mixed
/// partial magnitude at the reference point. Ties resolve to the
/// lexicographically smallest pair.
pub fn dominant_axis_selection(critic: &dyn ActionValue, s0: &[f64], a0: &[f64], fd_eps: f64) -> Result<(usize, usize)> {
    check_reference(critic, s0, a0)?;
    let mut best = (0, 0);
    let mut best_mag = f64::NEG_INFINITY;
    for i in 0..s0.len() {
        let col = fd_mixed_column(critic, s0, a0, i, fd_eps)?;
        for (j, v) in col.iter().enumerate() {
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = (i, j);
            }
        }
    }
    Ok(best)
}
