use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::eval::{evaluate, mean_std, EvalReport};
use super::train::{run_dir, train_seed, TrainOutcome};
use crate::error::{Error, Result};
use crate::regularizers::PaveHyperParams;

/// Keys accepted by [`sweep`].
pub const SWEEP_PARAMS: &[&str] = &["lambda1", "lambda2", "lambda3", "sigma", "delta"];

/// Train one seed, then evaluate its final actor on the configured noise grid.
pub fn train_and_evaluate(cfg: &ExperimentConfig, seed: u64, write: bool) -> Result<(TrainOutcome, EvalReport)> {
    let dir = write.then(|| run_dir(cfg, seed));
    let outcome = train_seed(cfg, seed, dir.as_deref())?;
    let report = evaluate(&outcome.agent.actor, &cfg.env, cfg.run.eval_episodes, &cfg.run.eval_sigmas, seed)?;
    if let Some(dir) = &dir {
        report.write_csv(&dir.join("metrics.csv"))?;
    }
    Ok((outcome, report))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub mean_return: f64,
    pub mean_smoothness: f64,
}

/// One training run per `(value, seed)`, varying only `parameter`. Returns
/// and smoothness are clean-evaluation means over `run.eval_episodes`.
pub fn sweep(cfg: &ExperimentConfig, parameter: &str, values: &[f64], write: bool) -> Result<Vec<SweepRow>> {
    if !SWEEP_PARAMS.contains(&parameter) {
        return Err(Error::Config(format!(
            "cannot sweep {parameter:?}; expected one of {SWEEP_PARAMS:?}"
        )));
    }
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut variants = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        c.set(&format!("pave.{parameter}"), &format!("{v:?}"))?;
        c.run.eval_sigmas = vec![0.0];
        c.run.out_dir = cfg.run.out_dir.join(format!("{parameter}={v:?}"));
        variants.push((v, c));
    }
    let jobs: Vec<(f64, &ExperimentConfig, u64)> = variants
        .iter()
        .flat_map(|(v, c)| c.run.seeds.iter().map(move |&s| (*v, c, s)))
        .collect();
    jobs.par_iter()
        .map(|&(value, c, seed)| {
            let (_, report) = train_and_evaluate(c, seed, write)?;
            let clean = report.at_sigma(0.0).expect("clean level evaluated");
            Ok(SweepRow {
                parameter: parameter.to_string(),
                value,
                seed,
                mean_return: clean.mean_return,
                mean_smoothness: clean.mean_smoothness,
            })
        })
        .collect()
}

/// The four incremental arms: base, then adding the mixed-partial,
/// vector-field and curvature terms with the weights of `full`.
pub fn ablation_arms(full: &PaveHyperParams) -> [(&'static str, PaveHyperParams); 4] {
    let with = |l1: f64, l2: f64, l3: f64| PaveHyperParams {
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        ..full.clone()
    };
    [
        ("Base", with(0.0, 0.0, 0.0)),
        ("+MPR", with(full.lambda1, 0.0, 0.0)),
        ("+MPR+VFC", with(full.lambda1, full.lambda2, 0.0)),
        ("+MPR+VFC+Curv", full.clone()),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub arm: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub seeds: String,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_smoothness: f64,
    pub std_smoothness: f64,
}

/// Train and evaluate every arm on the same seed list. Statistics are over
/// per-seed clean-evaluation means.
pub fn ablate(cfg: &ExperimentConfig, write: bool) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let seeds_label = cfg.run.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    ablation_arms(&cfg.pave)
        .into_iter()
        .map(|(arm, hp)| {
            let c = ExperimentConfig {
                pave: hp.clone(),
                run: super::config::RunConfig {
                    eval_sigmas: vec![0.0],
                    out_dir: cfg.run.out_dir.join(arm.trim_start_matches('+').replace('+', "_")),
                    ..cfg.run.clone()
                },
                ..cfg.clone()
            };
            let per_seed = c
                .run
                .seeds
                .par_iter()
                .map(|&seed| {
                    let (_, report) = train_and_evaluate(&c, seed, write)?;
                    let clean = report.at_sigma(0.0).expect("clean level evaluated");
                    Ok((clean.mean_return, clean.mean_smoothness))
                })
                .collect::<Result<Vec<_>>>()?;
            let returns: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
            let smooth: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
            let (mean_return, std_return) = mean_std(&returns);
            let (mean_smoothness, std_smoothness) = mean_std(&smooth);
            Ok(AblationRow {
                arm: arm.to_string(),
                lambda1: hp.lambda1,
                lambda2: hp.lambda2,
                lambda3: hp.lambda3,
                seeds: seeds_label.clone(),
                mean_return,
                std_return,
                mean_smoothness,
                std_smoothness,
            })
        })
        .collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arms_are_incremental() {
        let arms = ablation_arms(&PaveHyperParams::pendulum());
        assert!(arms[0].1.is_base());
        assert_eq!(arms[3].1, PaveHyperParams::pendulum());
        assert_eq!((arms[1].1.lambda2, arms[1].1.lambda3), (0.0, 0.0));
        assert_eq!(arms[2].1.lambda3, 0.0);
        assert_eq!(arms[2].1.lambda2, 0.005);
    }

    #[test]
    fn sweep_rejects_bad_requests() {
        let cfg = ExperimentConfig::preset("smoke").unwrap();
        assert!(sweep(&cfg, "gamma", &[0.5], false).is_err());
        assert!(sweep(&cfg, "lambda1", &[], false).is_err());
    }

    #[test]
    fn sweep_row_count() {
        let mut cfg = ExperimentConfig::preset("smoke").unwrap();
        cfg.run.seeds = vec![0, 1];
        cfg.run.total_steps = 200;
        let rows = sweep(&cfg, "lambda3", &[0.0, 2.0], false).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.mean_return.is_finite()));
    }
}
