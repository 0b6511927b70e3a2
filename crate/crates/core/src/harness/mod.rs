//! Experiment plumbing: configuration, seeding, training, evaluation,
//! probes, sweeps and ablations. Each function here backs one subcommand of
//! the `pave` binary and is equally usable as a library call.

pub mod config;
pub mod eval;
pub mod probe;
pub mod seeds;
pub mod selftest;
pub mod sweep;
pub mod train;

pub use config::{ExperimentConfig, ProbeConfig, RunConfig, PRESETS};
pub use eval::{evaluate, mean_std, rollout, Episode, EvalReport, EvalRow, SigmaSummary};
pub use probe::{load_quadratic_spec, probe_network, probe_quadratic, reference_point, NetworkProbe, QuadraticProbe};
pub use seeds::{derive_seed, splitmix64, stream_rng, Stream};
pub use selftest::{run_selftest, CheckResult};
pub use sweep::{ablate, ablation_arms, sweep, train_and_evaluate, write_rows, AblationRow, SweepRow, SWEEP_PARAMS};
pub use train::{run_dir, train_all, train_seed, LogRow, RunLog, TrainOutcome};
