//! Return and smoothness of checkpoints under scale-aware observation noise.
//!
//! ```text
//! cargo run --release --example noise_robustness -- runs/base/seed_0/checkpoints/step_0030000.ckpt
//! ```
//!
//! Without arguments a short smoke run supplies the policy.

use std::path::Path;

use pave::harness::{evaluate, train_seed, ExperimentConfig};
use pave::td3::Checkpoint;

const SIGMAS: [f64; 4] = [0.0, 0.01, 0.05, 0.1];

fn main() -> pave::Result<()> {
    let cfg = ExperimentConfig::preset("pendulum-pave")?;
    let mut actors = Vec::new();
    for p in std::env::args().skip(1) {
        actors.push((p.clone(), Checkpoint::load(Path::new(&p))?.actor));
    }
    if actors.is_empty() {
        let smoke = ExperimentConfig::preset("smoke")?;
        actors.push(("smoke run".to_string(), train_seed(&smoke, 0, None)?.agent.actor));
    }
    for (name, actor) in &actors {
        let report = evaluate(actor, &cfg.env, 10, &SIGMAS, 0)?;
        println!("{name}");
        let clean = report.at_sigma(0.0).unwrap().mean_return;
        for s in report.summary() {
            println!(
                "  sigma {:<5} return {:>8.1}  drop {:>6.1}  smoothness {:.4}",
                s.sigma,
                s.mean_return,
                clean - s.mean_return,
                s.mean_smoothness
            );
        }
    }
    Ok(())
}
