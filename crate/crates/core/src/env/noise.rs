use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale-aware observation noise: `obs + U(-sigma, sigma) * sigma_base`, per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseWrapperConfig {
    pub sigma: f64,
    pub sigma_base: Vec<f64>,
}

impl NoiseWrapperConfig {
    pub fn new(sigma: f64, sigma_base: Vec<f64>) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if sigma_base.is_empty() || sigma_base.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "sigma_base entries must be positive, got {sigma_base:?}"
            )));
        }
        Ok(Self { sigma, sigma_base })
    }
}

pub fn noisy_observe<R: Rng + ?Sized>(obs: &[f64], cfg: &NoiseWrapperConfig, rng: &mut R) -> Result<Vec<f64>> {
    if obs.len() != cfg.sigma_base.len() {
        return Err(Error::Dimension {
            what: "observation vs sigma_base",
            expected: cfg.sigma_base.len(),
            got: obs.len(),
        });
    }
    if cfg.sigma == 0.0 {
        return Ok(obs.to_vec());
    }
    Ok(obs
        .iter()
        .zip(&cfg.sigma_base)
        .map(|(&o, &b)| o + rng.random_range(-cfg.sigma..=cfg.sigma) * b)
        .collect())
}

/// Per-dimension population standard deviation of a set of observations.
pub fn estimate_sigma_base(observations: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = observations.first() else {
        return Err(Error::InvalidArgument("no observations to estimate sigma_base".into()));
    };
    let dim = first.len();
    let n = observations.len() as f64;
    let mut mean = vec![0.0; dim];
    for o in observations {
        if o.len() != dim {
            return Err(Error::Dimension {
                what: "observation",
                expected: dim,
                got: o.len(),
            });
        }
        for (m, &x) in mean.iter_mut().zip(o) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for o in observations {
        for ((v, &x), &m) in var.iter_mut().zip(o).zip(&mean) {
            *v += (x - m) * (x - m) / n;
        }
    }
    Ok(var.into_iter().map(f64::sqrt).collect())
}
