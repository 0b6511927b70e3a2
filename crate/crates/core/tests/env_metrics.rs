use std::f64::consts::PI;

use pave::env::{read_trajectory_csv, write_trajectory_csv, Pendulum, PendulumConfig, PendulumState};
use pave::harness::{
    ablate, evaluate, rollout, sweep, train_and_evaluate, train_seed, ExperimentConfig, RunLog,
};
use pave::metrics::cumulative_return;
use pave::regularizers::PaveHyperParams;
use pave::td3::Checkpoint;

#[test]
fn free_swing_conserves_energy() {
    // semi-implicit Euler keeps a nearby invariant; the gap to the true
    // energy grows with swing amplitude, so stay within 0.15 pi of hanging
    for offset in [0.15, 0.1, 0.05] {
        let mut p = Pendulum::new(PendulumConfig::default());
        p.reset_to(PendulumState {
            theta: PI * (1.0 - offset),
            theta_dot: 0.0,
        });
        let e0 = p.energy();
        let mut worst = 0.0f64;
        for _ in 0..200 {
            p.step(0.0).unwrap();
            assert!(p.state().theta_dot.abs() < 8.0);
            worst = worst.max((p.energy() - e0).abs() / e0.abs());
        }
        assert!(worst < 0.02, "offset {offset}: relative drift {worst}");
    }
}

#[test]
fn episode_return_matches_trajectory_dump() {
    let cfg = ExperimentConfig::preset("smoke").unwrap();
    let out = train_seed(&cfg, 3, None).unwrap();
    let ep = rollout(&out.agent.actor, &cfg.env, 17, None).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("traj.csv");
    write_trajectory_csv(&path, &ep.trajectory).unwrap();
    let rows = read_trajectory_csv(&path).unwrap();
    assert_eq!(rows.len(), 200);
    let from_csv: f64 = rows.iter().map(|r| r.reward).sum();
    assert!((from_csv - cumulative_return(&ep.rewards)).abs() < 1e-9);
    assert!(rows.iter().zip(&ep.actions).all(|(r, a)| r.action == a[0]));
}

#[test]
fn same_seed_runs_are_identical() {
    let cfg = ExperimentConfig::preset("smoke").unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outs: Vec<_> = dirs.iter().map(|d| train_seed(&cfg, 7, Some(d.path())).unwrap()).collect();
    assert_eq!(outs[0].log, outs[1].log);
    let read = |d: &tempfile::TempDir, f: &std::path::Path| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&dirs[0], "run_log.csv".as_ref()), read(&dirs[1], "run_log.csv".as_ref()));
    for c in &outs[0].checkpoints {
        assert_eq!(read(&dirs[0], c), read(&dirs[1], c));
    }
    let other = train_seed(&cfg, 8, None).unwrap();
    assert_ne!(other.log, outs[0].log);
}

#[test]
fn base_label_and_vanilla_path() {
    let base = ExperimentConfig::preset("pendulum-base").unwrap();
    assert_eq!(base.label(), "base");
    let pave = ExperimentConfig::preset("pendulum-pave").unwrap();
    assert_eq!(pave.label(), "pave");
    assert_eq!((pave.pave.lambda1, pave.pave.lambda2, pave.pave.lambda3), (2.0, 0.005, 2.0));
}

#[test]
fn clean_evaluation_is_reproducible() {
    let cfg = ExperimentConfig::preset("smoke").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = train_seed(&cfg, 0, Some(tmp.path())).unwrap();
    let ckpt = Checkpoint::load(&tmp.path().join(out.checkpoints.last().unwrap())).unwrap();
    assert_eq!(ckpt.actor, out.agent.actor);
    let paths = [tmp.path().join("a.csv"), tmp.path().join("b.csv")];
    for p in &paths {
        evaluate(&ckpt.actor, &cfg.env, 3, &[0.0], 5).unwrap().write_csv(p).unwrap();
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());

    let grid = evaluate(&ckpt.actor, &cfg.env, 2, &[0.0, 0.01, 0.05, 0.1], 5).unwrap();
    assert_eq!(grid.summary().len(), 4);
    assert!(evaluate(&ckpt.actor, &cfg.env, 0, &[0.0], 5).is_err());
}

#[test]
fn single_value_sweep_equals_train_then_eval() {
    let cfg = ExperimentConfig::preset("smoke").unwrap();
    let rows = sweep(&cfg, "lambda1", &[2.0], false).unwrap();
    assert_eq!(rows.len(), 1);
    let mut clean = cfg.clone();
    clean.run.eval_sigmas = vec![0.0];
    let (_, report) = train_and_evaluate(&clean, 0, false).unwrap();
    let s = report.at_sigma(0.0).unwrap();
    assert_eq!(rows[0].mean_return, s.mean_return);
    assert_eq!(rows[0].mean_smoothness, s.mean_smoothness);
}

#[test]
fn curvature_sweep_reproduces_ablation_contrast() {
    let mut cfg = ExperimentConfig::preset("smoke").unwrap();
    cfg.run.total_steps = 300;
    let rows = sweep(&cfg, "lambda3", &[0.0, 2.0], false).unwrap();
    let arms = ablate(&cfg, false).unwrap();
    assert_eq!(arms.len(), 4);
    assert_eq!((arms[0].lambda1, arms[0].lambda2, arms[0].lambda3), (0.0, 0.0, 0.0));
    assert_eq!(arms[3].lambda3, PaveHyperParams::pendulum().lambda3);
    assert!(arms.iter().all(|a| a.seeds == "0"));
    assert_eq!(rows[0].mean_return, arms[2].mean_return);
    assert_eq!(rows[1].mean_return, arms[3].mean_return);
    assert_eq!(rows[1].mean_smoothness, arms[3].mean_smoothness);
}

#[test]
fn run_log_round_trips() {
    let cfg = ExperimentConfig::preset("smoke").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = train_seed(&cfg, 2, Some(tmp.path())).unwrap();
    let back = RunLog::read_csv("pave", 2, &tmp.path().join("run_log.csv")).unwrap();
    assert_eq!(back, out.log);
    assert!(back.rows.windows(2).all(|w| w[0].step < w[1].step));
}
