use serde::Serialize;

use super::fft::fft_real;
use crate::error::{Error, Result};

/// Per-dimension action sequences sampled every `dt` seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionTrace {
    dt: f64,
    series: Vec<Vec<f64>>,
}

impl ActionTrace {
    pub fn new(dt: f64, series: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let Some(n) = series.first().map(Vec::len) else {
            return Err(Error::InvalidArgument("action trace has no dimensions".into()));
        };
        if n < 2 {
            return Err(Error::InvalidArgument(format!("action trace needs >= 2 samples, got {n}")));
        }
        if series.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidArgument("action dimensions differ in length".into()));
        }
        if series.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action trace"));
        }
        Ok(Self { dt, series })
    }

    /// Build from a time-major list of action vectors.
    pub fn from_steps(dt: f64, steps: &[Vec<f64>]) -> Result<Self> {
        let d = steps.first().map(Vec::len).unwrap_or(0);
        let series = (0..d).map(|j| steps.iter().map(|a| a[j]).collect()).collect();
        Self::new(dt, series)
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> usize {
        self.series.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn series(&self) -> &[Vec<f64>] {
        &self.series
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub per_dim: Vec<f64>,
    pub aggregate: f64,
    pub n: usize,
    pub sample_rate: f64,
}

/// Frequency-weighted mean amplitude of the single-sided spectrum.
///
/// Each dimension is mean-centered and zero-padded to `n_pad`; with
/// `A_i = 2|X_i|/n` at `f_i = i f_s / n_pad` for `i = 1..=n_pad/2`, the score
/// is `2/(n_pad f_s) * sum A_i f_i`. The aggregate is the mean over dimensions.
pub fn smoothness_score(trace: &ActionTrace) -> Result<SmoothnessReport> {
    let n = trace.len();
    let fs = 1.0 / trace.dt;
    let mut per_dim = Vec::with_capacity(trace.dims());
    for series in &trace.series {
        // rounding in the mean would leave a residual spectrum
        if series.iter().all(|&v| v == series[0]) {
            per_dim.push(0.0);
            continue;
        }
        let mean = series.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let spectrum = fft_real(&centered)?;
        let n_pad = spectrum.len();
        let weighted: f64 = (1..=n_pad / 2)
            .map(|i| {
                let amp = 2.0 / n as f64 * spectrum[i].norm();
                amp * (i as f64 * fs / n_pad as f64)
            })
            .sum();
        per_dim.push(2.0 / (n_pad as f64 * fs) * weighted);
    }
    let aggregate = per_dim.iter().sum::<f64>() / per_dim.len() as f64;
    Ok(SmoothnessReport {
        per_dim,
        aggregate,
        n,
        sample_rate: fs,
    })
}

/// Undiscounted episode return.
pub fn cumulative_return(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}
