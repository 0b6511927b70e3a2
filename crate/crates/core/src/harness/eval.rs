use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::seeds::{derive_seed, splitmix64, stream_rng, Stream};
use crate::autodiff::ActorNetwork;
use crate::env::{
    estimate_sigma_base, noisy_observe, NoiseWrapperConfig, Pendulum, PendulumConfig, TrajectoryRow,
};
use crate::error::{Error, Result};
use crate::metrics::{cumulative_return, smoothness_score, ActionTrace};

/// Clean greedy episodes used to estimate the noise scale.
pub const SIGMA_BASE_EPISODES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub rewards: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    /// Clean observations, one per step, before the action.
    pub observations: Vec<Vec<f64>>,
    pub trajectory: Vec<TrajectoryRow>,
}

impl Episode {
    pub fn total_return(&self) -> f64 {
        cumulative_return(&self.rewards)
    }
}

/// Greedy rollout from the state drawn by `reset_seed`. When `noise` is
/// given, the policy sees perturbed observations; the environment does not.
pub fn rollout(
    actor: &ActorNetwork,
    env_cfg: &PendulumConfig,
    reset_seed: u64,
    mut noise: Option<(&NoiseWrapperConfig, &mut ChaCha8Rng)>,
) -> Result<Episode> {
    let mut env = Pendulum::new(env_cfg.clone());
    let mut obs = env.reset(reset_seed).observation;
    let mut ep = Episode {
        rewards: Vec::new(),
        actions: Vec::new(),
        observations: Vec::new(),
        trajectory: Vec::new(),
    };
    loop {
        let seen = match noise.as_mut() {
            Some((cfg, rng)) => noisy_observe(&obs, cfg, *rng)?,
            None => obs.clone(),
        };
        let action = actor.act(&seen)?;
        let state = env.state();
        let res = env.step(action[0])?;
        ep.trajectory.push(TrajectoryRow {
            t: ep.rewards.len(),
            theta: state.theta,
            theta_dot: state.theta_dot,
            action: action[0],
            reward: res.reward,
            obs0: obs[0],
            obs1: obs[1],
            obs2: obs[2],
        });
        ep.observations.push(obs);
        ep.rewards.push(res.reward);
        ep.actions.push(action);
        obs = res.observation;
        if res.done || res.truncated {
            return Ok(ep);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub seed: u64,
    pub sigma: f64,
    pub episode: usize,
    pub episode_return: f64,
    pub smoothness: Vec<f64>,
    pub smoothness_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub sigma_base: Vec<f64>,
    pub rows: Vec<EvalRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaSummary {
    pub sigma: f64,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_smoothness: f64,
    pub std_smoothness: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    /// Per-sigma means and population standard deviations, in first-seen order.
    pub fn summary(&self) -> Vec<SigmaSummary> {
        let mut sigmas: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !sigmas.contains(&r.sigma) {
                sigmas.push(r.sigma);
            }
        }
        sigmas
            .into_iter()
            .map(|sigma| {
                let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.sigma == sigma).collect();
                let returns: Vec<f64> = rows.iter().map(|r| r.episode_return).collect();
                let smooth: Vec<f64> = rows.iter().map(|r| r.smoothness_mean).collect();
                let (mean_return, std_return) = mean_std(&returns);
                let (mean_smoothness, std_smoothness) = mean_std(&smooth);
                SigmaSummary {
                    sigma,
                    episodes: rows.len(),
                    mean_return,
                    std_return,
                    mean_smoothness,
                    std_smoothness,
                }
            })
            .collect()
    }

    pub fn at_sigma(&self, sigma: f64) -> Option<SigmaSummary> {
        self.summary().into_iter().find(|s| s.sigma == sigma)
    }

    /// `seed, sigma, episode, return, smoothness_dim0.., smoothness_mean`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let dims = self.rows.first().map_or(0, |r| r.smoothness.len());
        let mut header = vec!["seed".to_string(), "sigma".into(), "episode".into(), "return".into()];
        header.extend((0..dims).map(|j| format!("smoothness_dim{j}")));
        header.push("smoothness_mean".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.seed.to_string(),
                format!("{:?}", r.sigma),
                r.episode.to_string(),
                format!("{:?}", r.episode_return),
            ];
            rec.extend(r.smoothness.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", r.smoothness_mean));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Greedy evaluation of `actor` at each noise level.
///
/// Episode start states come from the evaluation stream of `seed` and are
/// shared across noise levels, so rows at different sigmas are paired. The
/// noise scale is the per-dimension std of observations over
/// [`SIGMA_BASE_EPISODES`] clean episodes.
pub fn evaluate(
    actor: &ActorNetwork,
    env_cfg: &PendulumConfig,
    episodes: usize,
    sigmas: &[f64],
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    if sigmas.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one sigma".into()));
    }
    let mut rng = stream_rng(seed, Stream::Eval);
    let starts: Vec<u64> = (0..episodes).map(|_| rng.random()).collect();
    let calibration: Vec<u64> = (0..SIGMA_BASE_EPISODES).map(|_| rng.random()).collect();

    let mut observed = Vec::new();
    for &s in &calibration {
        observed.extend(rollout(actor, env_cfg, s, None)?.observations);
    }
    // a dimension the policy never moves gets a tiny scale instead of zero
    let sigma_base: Vec<f64> = estimate_sigma_base(&observed)?.into_iter().map(|b| b.max(1e-6)).collect();

    let dt = env_cfg.dt;
    let mut rows = Vec::with_capacity(episodes * sigmas.len());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let wrapper = NoiseWrapperConfig::new(sigma, sigma_base.clone())?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(splitmix64(derive_seed(seed, Stream::EvalNoise) ^ k as u64));
        for (episode, &start) in starts.iter().enumerate() {
            let noise = (sigma > 0.0).then_some((&wrapper, &mut noise_rng));
            let ep = rollout(actor, env_cfg, start, noise)?;
            let report = smoothness_score(&ActionTrace::from_steps(dt, &ep.actions)?)?;
            rows.push(EvalRow {
                seed,
                sigma,
                episode,
                episode_return: ep.total_return(),
                smoothness: report.per_dim,
                smoothness_mean: report.aggregate,
            });
        }
    }
    Ok(EvalReport { sigma_base, rows })
}
