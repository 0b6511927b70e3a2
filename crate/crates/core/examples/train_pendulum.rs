//! Train one seed on pendulum and evaluate it under observation noise.
//!
//! ```text
//! cargo run --release --example train_pendulum -- pendulum-pave 3
//! cargo run --release --example train_pendulum -- pendulum-base 3 30000
//! ```
//!
//! Arguments: preset, seed, and optionally the number of environment steps.

use pave::harness::{train_and_evaluate, ExperimentConfig};

fn main() -> pave::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset = args.first().map(String::as_str).unwrap_or("smoke");
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = ExperimentConfig::preset(preset)?;
    if let Some(steps) = args.get(2) {
        cfg.set("run.total_steps", steps)?;
    }
    cfg.run.out_dir = std::env::temp_dir().join("pave-example");

    let start = std::time::Instant::now();
    let (outcome, report) = train_and_evaluate(&cfg, seed, true)?;
    println!(
        "{} seed {seed}: {} steps in {:.1?}, run dir {}",
        outcome.label,
        cfg.run.total_steps,
        start.elapsed(),
        outcome.run_dir.as_ref().unwrap().display()
    );
    for row in outcome.log.rows.iter().filter(|r| r.checkpoint.is_some()) {
        println!(
            "  step {:>6}  L_TD {:>10.4}  L_MPR {:>10}  L_Curv {:>10}",
            row.step,
            row.l_td.unwrap_or(f64::NAN),
            row.l_mpr.map_or("-".into(), |v| format!("{v:.4}")),
            row.l_curv.map_or("-".into(), |v| format!("{v:.4}")),
        );
    }
    println!("sigma_base {:?}", report.sigma_base);
    for s in report.summary() {
        println!(
            "  sigma {:<5} return {:>8.1} ({:.1})  smoothness {:.4} ({:.4})",
            s.sigma, s.mean_return, s.std_return, s.mean_smoothness, s.std_smoothness
        );
    }
    Ok(())
}
