use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::PendulumConfig;
use crate::error::{Error, Result};
use crate::regularizers::PaveHyperParams;
use crate::td3::Td3Config;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub total_steps: usize,
    /// Environment steps between checkpoints.
    pub eval_interval: usize,
    /// Greedy episodes per seed at evaluation time.
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Observation-noise levels visited by `eval`.
    pub eval_sigmas: Vec<f64>,
    /// Observation noise during training; 0 disables it.
    pub train_noise_sigma: f64,
    /// Consecutive non-finite critic losses tolerated before a seed aborts.
    pub max_nonfinite_streak: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            total_steps: 30_000,
            eval_interval: 5_000,
            eval_episodes: 10,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs"),
            eval_sigmas: vec![0.0, 0.01, 0.05, 0.1],
            train_noise_sigma: 0.0,
            max_nonfinite_streak: 100,
        }
    }
}

/// Landscape probe settings for network checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Pendulum angle of the reference transition (0 is upright).
    pub reference_theta: f64,
    pub reference_theta_dot: f64,
    pub reference_action: f64,
    pub grid_points: usize,
    pub fd_eps: f64,
    pub clip: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            reference_theta: std::f64::consts::PI,
            reference_theta_dot: 0.0,
            reference_action: 0.0,
            grid_points: 41,
            fd_eps: 1e-3,
            clip: 300.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: PendulumConfig,
    pub td3: Td3Config,
    pub pave: PaveHyperParams,
    pub run: RunConfig,
    pub probe: ProbeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset("pendulum-pave").expect("builtin preset")
    }
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: &[&str] = &["pendulum-pave", "pendulum-base", "smoke"];

fn desk_td3() -> Td3Config {
    Td3Config {
        batch_size: 64,
        actor_hidden: vec![64, 64],
        critic_hidden: vec![64, 64],
        warmup_steps: 1_000,
        buffer_capacity: 100_000,
        ..Td3Config::default()
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            env: PendulumConfig::default(),
            td3: desk_td3(),
            pave: PaveHyperParams::pendulum(),
            run: RunConfig::default(),
            probe: ProbeConfig::default(),
        };
        match name {
            "pendulum-pave" => Ok(base),
            "pendulum-base" => Ok(Self {
                pave: PaveHyperParams::base(),
                ..base
            }),
            "smoke" => Ok(Self {
                td3: Td3Config {
                    batch_size: 16,
                    actor_hidden: vec![16],
                    critic_hidden: vec![16],
                    warmup_steps: 100,
                    ..desk_td3()
                },
                run: RunConfig {
                    total_steps: 400,
                    eval_interval: 200,
                    eval_episodes: 2,
                    seeds: vec![0],
                    ..RunConfig::default()
                },
                probe: ProbeConfig {
                    grid_points: 5,
                    ..ProbeConfig::default()
                },
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            ))),
        }
    }

    /// `"base"` when every regularizer weight is zero, `"pave"` otherwise.
    pub fn label(&self) -> &'static str {
        if self.pave.is_base() {
            "base"
        } else {
            "pave"
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.td3.validate()?;
        self.pave.validate()?;
        let run = &self.run;
        if run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        if run.total_steps < self.td3.warmup_steps {
            return Err(Error::Config(format!(
                "run.total_steps ({}) must be >= td3.warmup_steps ({})",
                run.total_steps, self.td3.warmup_steps
            )));
        }
        if run.eval_interval == 0 || run.eval_episodes == 0 {
            return Err(Error::Config("run.eval_interval and run.eval_episodes must be positive".into()));
        }
        if run.eval_sigmas.is_empty() || run.eval_sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("run.eval_sigmas must be nonnegative, got {:?}", run.eval_sigmas)));
        }
        if !(run.train_noise_sigma >= 0.0 && run.train_noise_sigma.is_finite()) {
            return Err(Error::Config("run.train_noise_sigma must be >= 0".into()));
        }
        if self.probe.grid_points < 2 || !(self.probe.fd_eps > 0.0) || !(self.probe.clip > 0.0) {
            return Err(Error::Config("probe needs grid_points >= 2, fd_eps > 0, clip > 0".into()));
        }
        if self.env.max_steps == 0 || !(self.env.dt > 0.0) {
            return Err(Error::Config("env.max_steps and env.dt must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Set one dotted key, e.g. `("td3.batch_size", "128")` or
    /// `("run.seeds", "[1, 2]")`. The value is read as a TOML literal, and
    /// as a bare string if that fails.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        }
        *slot = coerce(slot, parsed);
        let updated: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Apply `--key value` pairs in order.
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k.trim_start_matches("--"), v)?;
        }
        Ok(())
    }
}

/// Integers given where floats are expected are accepted as floats.
fn coerce(old: &toml::Value, new: toml::Value) -> toml::Value {
    match (old, &new) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        (toml::Value::Array(o), toml::Value::Array(n)) if o.first().is_some_and(|v| v.is_float()) => {
            toml::Value::Array(n.iter().map(|v| coerce(&o[0], v.clone())).collect())
        }
        _ => new,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn pendulum_preset_weights() {
        let cfg = ExperimentConfig::preset("pendulum-pave").unwrap();
        assert_eq!((cfg.pave.lambda1, cfg.pave.lambda2, cfg.pave.lambda3), (2.0, 0.005, 2.0));
        assert_eq!(cfg.label(), "pave");
        assert_eq!(ExperimentConfig::preset("pendulum-base").unwrap().label(), "base");
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[pave]\nlambda1 = 0.5\n[run]\nseeds = [3]\n").unwrap();
        assert_eq!(cfg.pave.lambda1, 0.5);
        assert_eq!(cfg.pave.lambda3, 2.0);
        assert_eq!(cfg.run.seeds, vec![3]);
        let dotted = ExperimentConfig::from_toml_str("pave.sigma = 0.2\ntd3.gamma = 0.9\n").unwrap();
        assert_eq!((dotted.pave.sigma, dotted.td3.gamma), (0.2, 0.9));
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("td3.batch_size", "32").unwrap();
        cfg.set("pave.lambda2", "1").unwrap();
        cfg.set("run.eval_sigmas", "[0, 1]").unwrap();
        cfg.set("run.out_dir", "somewhere/else").unwrap();
        assert_eq!(cfg.td3.batch_size, 32);
        assert_eq!(cfg.pave.lambda2, 1.0);
        assert_eq!(cfg.run.eval_sigmas, vec![0.0, 1.0]);
        assert_eq!(cfg.run.out_dir, PathBuf::from("somewhere/else"));
        assert!(cfg.set("td3.nope", "1").is_err());
        assert!(cfg.set("td3.batch_size", "\"x\"").is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ExperimentConfig::from_toml_str("[run]\nseeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[run]\ntotal_steps = 10\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[pave]\nlambda1 = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[pave]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::preset("nope").is_err());
    }
}
