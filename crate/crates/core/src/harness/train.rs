use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::{derive_seed, stream_rng, Stream};
use crate::env::{estimate_sigma_base, noisy_observe, NoiseWrapperConfig, Pendulum, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::regularizers::PaveRegularizer;
use crate::td3::{config_hash, AuxiliaryLoss, Checkpoint, ReplayBuffer, Td3Agent, Transition};

/// One run-log record. Losses are means over the updates since the previous
/// record, each summed over both critics; regularizer columns are empty when
/// the term was not built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub episode: u64,
    pub episode_return: Option<f64>,
    #[serde(rename = "L_TD")]
    pub l_td: Option<f64>,
    #[serde(rename = "L_MPR")]
    pub l_mpr: Option<f64>,
    #[serde(rename = "L_VFC")]
    pub l_vfc: Option<f64>,
    #[serde(rename = "L_Curv")]
    pub l_curv: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Checkpoint file name relative to the run directory, if one was written.
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub label: String,
    pub seed: u64,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(label: &str, seed: u64, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>()?;
        Ok(Self {
            label: label.to_string(),
            seed,
            rows,
        })
    }

    /// Episode returns in order.
    pub fn episode_returns(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.episode_return).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub seed: u64,
    pub label: String,
    pub run_dir: Option<PathBuf>,
    pub log: RunLog,
    pub checkpoints: Vec<PathBuf>,
    pub agent: Td3Agent,
    pub config_hash: u64,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_agent(&self.agent, self.log.rows.last().map_or(0, |r| r.step), self.config_hash)
    }
}

#[derive(Default)]
struct LossAccumulator {
    n: usize,
    td: f64,
    mpr: Option<f64>,
    vfc: Option<f64>,
    curv: Option<f64>,
}

impl LossAccumulator {
    fn add(&mut self, r: &crate::td3::CriticUpdateReport) {
        self.n += 1;
        self.td += r.td;
        for (acc, v) in [(&mut self.mpr, r.mpr), (&mut self.vfc, r.vfc), (&mut self.curv, r.curv)] {
            if let Some(v) = v {
                *acc = Some(acc.unwrap_or(0.0) + v);
            }
        }
    }

    fn take(&mut self) -> [Option<f64>; 4] {
        let n = self.n as f64;
        let mean = |v: Option<f64>| v.map(|x| x / n);
        let out = if self.n == 0 {
            [None; 4]
        } else {
            [Some(self.td / n), mean(self.mpr), mean(self.vfc), mean(self.curv)]
        };
        *self = Self::default();
        out
    }
}

/// Run directory for one seed: `<out_dir>/<label>/seed_<seed>`.
pub fn run_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.run.out_dir.join(cfg.label()).join(format!("seed_{seed}"))
}

/// Train one seed.
///
/// With `dir` set, the config snapshot, run log and checkpoints are written
/// there; otherwise everything stays in memory.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let snapshot = cfg.to_toml();
    let hash = config_hash(&snapshot);
    if let Some(dir) = dir {
        fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.toml");
        fs::write(&path, &snapshot).map_err(|e| Error::io(&path, e))?;
    }

    let td3 = &cfg.td3;
    let max_action = cfg.env.max_torque;
    let mut agent = Td3Agent::new(OBS_DIM, ACTION_DIM, max_action, td3.clone(), &mut stream_rng(seed, Stream::Init))?;
    let mut env = Pendulum::new(cfg.env.clone());
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut explore_rng = stream_rng(seed, Stream::Exploration);
    let mut replay_rng = stream_rng(seed, Stream::Replay);
    let mut target_rng = stream_rng(seed, Stream::TargetNoise);
    let mut noise_rng = stream_rng(seed, Stream::EvalNoise);
    let mut regularizer = if cfg.pave.is_base() {
        None
    } else {
        Some(PaveRegularizer::new(
            cfg.pave.clone(),
            derive_seed(seed, Stream::Perturbation),
            derive_seed(seed, Stream::Rademacher),
        )?)
    };
    let mut buffer = ReplayBuffer::new(td3.buffer_capacity)?;
    let mut train_noise: Option<NoiseWrapperConfig> = None;

    let mut log = RunLog {
        label: cfg.label().to_string(),
        seed,
        rows: Vec::new(),
    };
    let mut checkpoints = Vec::new();
    let mut losses = LossAccumulator::default();
    let mut streak = 0usize;
    let mut episode = 0u64;
    let mut episode_return = 0.0;
    let mut seen = env.reset(env_rng.random()).observation;

    for t in 1..=cfg.run.total_steps {
        let action = if t <= td3.warmup_steps {
            (0..ACTION_DIM).map(|_| explore_rng.random_range(-max_action..=max_action)).collect()
        } else {
            agent.select_action(&seen, true, &mut explore_rng)?
        };
        let res = env.step(action[0])?;
        let next_seen = match &train_noise {
            Some(nc) => noisy_observe(&res.observation, nc, &mut noise_rng)?,
            None => res.observation.clone(),
        };
        buffer.push(Transition {
            s: seen,
            a: action,
            r: res.reward,
            s_next: next_seen.clone(),
            done: res.done,
            truncated: res.truncated,
        })?;
        episode_return += res.reward;
        seen = next_seen;

        if t == td3.warmup_steps && cfg.run.train_noise_sigma > 0.0 {
            let observed: Vec<Vec<f64>> = (0..buffer.len()).filter_map(|i| buffer.get(i)).map(|tr| tr.s.clone()).collect();
            let base = estimate_sigma_base(&observed)?.into_iter().map(|b| b.max(1e-6)).collect();
            train_noise = Some(NoiseWrapperConfig::new(cfg.run.train_noise_sigma, base)?);
        }

        if t > td3.warmup_steps && buffer.len() >= td3.batch_size {
            let batch = buffer.sample(td3.batch_size, &mut replay_rng)?;
            let aux = regularizer.as_mut().map(|r| r as &mut dyn AuxiliaryLoss);
            let report = agent.train_step(&batch, aux, &mut target_rng)?;
            if report.critic.skipped {
                streak += 1;
                if streak > cfg.run.max_nonfinite_streak {
                    return Err(Error::NumericalAbort(format!(
                        "seed {seed}: non-finite critic loss for {streak} consecutive updates at step {t}"
                    )));
                }
            } else {
                streak = 0;
                losses.add(&report.critic);
            }
        }

        let episode_end = res.done || res.truncated;
        let ckpt_due = t % cfg.run.eval_interval == 0 || t == cfg.run.total_steps;
        let mut checkpoint = None;
        if ckpt_due {
            if let Some(dir) = dir {
                let name = format!("checkpoints/step_{t:07}.ckpt");
                let path = dir.join(&name);
                Checkpoint::from_agent(&agent, t as u64, hash).save(&path)?;
                checkpoints.push(path);
                checkpoint = Some(name);
            }
        }
        if episode_end || ckpt_due {
            let [l_td, l_mpr, l_vfc, l_curv] = losses.take();
            log.rows.push(LogRow {
                step: t as u64,
                episode,
                episode_return: episode_end.then_some(episode_return),
                l_td,
                l_mpr,
                l_vfc,
                l_curv,
                lambda1: cfg.pave.lambda1,
                lambda2: cfg.pave.lambda2,
                lambda3: cfg.pave.lambda3,
                checkpoint,
            });
        }
        if episode_end {
            episode += 1;
            episode_return = 0.0;
            let obs = env.reset(env_rng.random()).observation;
            seen = match &train_noise {
                Some(nc) => noisy_observe(&obs, nc, &mut noise_rng)?,
                None => obs.clone(),
            };
        }
    }

    if let Some(dir) = dir {
        log.write_csv(&dir.join("run_log.csv"))?;
    }
    Ok(TrainOutcome {
        seed,
        label: cfg.label().to_string(),
        run_dir: dir.map(Path::to_path_buf),
        log,
        checkpoints,
        agent,
        config_hash: hash,
    })
}

/// Train every configured seed, in parallel, each under [`run_dir`].
/// A seed that aborts does not stop the others.
pub fn train_all(cfg: &ExperimentConfig, write: bool) -> Vec<Result<TrainOutcome>> {
    cfg.run
        .seeds
        .par_iter()
        .map(|&seed| {
            let dir = write.then(|| run_dir(cfg, seed));
            train_seed(cfg, seed, dir.as_deref())
        })
        .collect()
}
