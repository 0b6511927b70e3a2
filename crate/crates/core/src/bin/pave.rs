use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pave::harness::{
    ablate, evaluate, load_quadratic_spec, probe_network, probe_quadratic, run_selftest, sweep, train_all, write_rows,
    ExperimentConfig,
};
use pave::td3::Checkpoint;
use pave::{Error, Result};

#[derive(Parser)]
#[command(name = "pave", about = "Critic-geometry regularized TD3 on pendulum swing-up")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; defaults to the chosen preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: pendulum-pave, pendulum-base or smoke.
    #[arg(long, default_value = "pendulum-pave")]
    preset: String,
    /// Config overrides as `--section.key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(&self.preset)?,
        };
        if self.overrides.len() % 2 != 0 {
            return Err(Error::Config(format!("overrides must come in pairs: {:?}", self.overrides)));
        }
        for pair in self.overrides.chunks(2) {
            let key = pair[0]
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected --key, got {:?}", pair[0])))?;
            cfg.set(key, &pair[1])?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every configured seed and write run directories.
    Train(ConfigArgs),
    /// Greedy evaluation of a checkpoint under observation noise.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Noise levels, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        sigma: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Mixed-partial landscape of a checkpoint, or Jacobian report of a quadratic spec.
    Probe {
        #[arg(long, conflicts_with = "quadratic", required_unless_present = "quadratic")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        quadratic: Option<PathBuf>,
        /// Fixed `state,action` axes instead of the dominant pair.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value = "probe")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Vary one regularizer setting over a list of values.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Base, +MPR, +MPR+VFC and full configuration on shared seeds.
    Ablate(ConfigArgs),
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn create_dir(path: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Train(args) => {
            let cfg = args.load()?;
            let mut first_err = None;
            for res in train_all(&cfg, true) {
                match res {
                    Ok(out) => {
                        let last: Vec<f64> = out.log.episode_returns().into_iter().rev().take(10).collect();
                        let mean = last.iter().sum::<f64>() / last.len().max(1) as f64;
                        println!(
                            "{} seed {}: last-10 episode return {mean:.1}, run dir {}",
                            out.label,
                            out.seed,
                            out.run_dir.as_deref().unwrap_or(std::path::Path::new("-")).display()
                        );
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Cmd::Eval {
            checkpoint,
            episodes,
            sigma,
            seed,
            out,
            cfg,
        } => {
            let cfg = cfg.load()?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let report = evaluate(&ckpt.actor, &cfg.env, episodes, &sigma, seed)?;
            report.write_csv(&out)?;
            for s in report.summary() {
                println!(
                    "sigma {:<6} return {:.1} ({:.1})  smoothness {:.4} ({:.4})",
                    s.sigma, s.mean_return, s.std_return, s.mean_smoothness, s.std_smoothness
                );
            }
            Ok(())
        }
        Cmd::Probe {
            checkpoint,
            quadratic,
            axes,
            pairs,
            radius,
            out,
            cfg,
        } => {
            let cfg = cfg.load()?;
            create_dir(&out)?;
            if let Some(spec) = quadratic {
                let report = probe_quadratic(&load_quadratic_spec(&spec)?, pairs, radius, 0)?;
                let path = out.join("jacobian_report.toml");
                std::fs::write(&path, report.to_toml()).map_err(|e| Error::io(&path, e))?;
                print!("{}", report.to_toml());
            } else if let Some(path) = checkpoint {
                let ckpt = Checkpoint::load(&path)?;
                let axes = match axes.as_deref() {
                    None => None,
                    Some(&[i, j]) => Some((i, j)),
                    Some(v) => return Err(Error::Config(format!("--axes takes two indices, got {v:?}"))),
                };
                let p = probe_network(&ckpt.critics[0], axes, &cfg.env, &cfg.probe)?;
                p.grid.write_csv(&out.join("landscape.csv"))?;
                println!(
                    "axes s{} a{}: mean {:.4}, max {:.4} (clip {})",
                    p.axes.0,
                    p.axes.1,
                    p.grid.mean(),
                    p.grid.max(),
                    p.grid.clip_value
                );
            }
            Ok(())
        }
        Cmd::Sweep { param, values, cfg } => {
            let cfg = cfg.load()?;
            let rows = sweep(&cfg, &param, &values, true)?;
            create_dir(&cfg.run.out_dir)?;
            let path = cfg.run.out_dir.join(format!("sweep_{param}.csv"));
            write_rows(&path, &rows)?;
            println!("{} rows written to {}", rows.len(), path.display());
            Ok(())
        }
        Cmd::Ablate(args) => {
            let cfg = args.load()?;
            let rows = ablate(&cfg, true)?;
            create_dir(&cfg.run.out_dir)?;
            let path = cfg.run.out_dir.join("ablation.csv");
            write_rows(&path, &rows)?;
            for r in &rows {
                println!(
                    "{:<14} return {:.1} ({:.1})  smoothness {:.4} ({:.4})",
                    r.arm, r.mean_return, r.std_return, r.mean_smoothness, r.std_smoothness
                );
            }
            Ok(())
        }
        Cmd::Selftest { seed } => {
            let results = run_selftest(seed)?;
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Error::NumericalAbort("selftest failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
