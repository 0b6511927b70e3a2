//! Incremental ablation: Base, +MPR, +MPR+VFC, +MPR+VFC+Curv on shared seeds.
//!
//! ```text
//! cargo run --release --example ablation               # smoke preset, seconds
//! cargo run --release --example ablation -- pendulum-pave 0,1
//! ```

use pave::harness::{ablate, ExperimentConfig};

fn main() -> pave::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ExperimentConfig::preset(args.first().map(String::as_str).unwrap_or("smoke"))?;
    if let Some(seeds) = args.get(1) {
        cfg.set("run.seeds", &format!("[{seeds}]"))?;
    }
    cfg.run.out_dir = std::env::temp_dir().join("pave-ablation");
    for row in ablate(&cfg, false)? {
        println!(
            "{:<14} lambdas ({}, {}, {})  return {:>8.1} ({:.1})  smoothness {:.4} ({:.4})",
            row.arm, row.lambda1, row.lambda2, row.lambda3, row.mean_return, row.std_return, row.mean_smoothness, row.std_smoothness
        );
    }
    Ok(())
}
