//! Spectral smoothness of a few action traces.
//!
//! ```text
//! cargo run --release --example fft_smoothness
//! ```

use std::f64::consts::PI;

use pave::metrics::{fft_real, smoothness_score, ActionTrace};

fn score(name: &str, xs: Vec<f64>) -> pave::Result<()> {
    let trace = ActionTrace::from_steps(0.05, &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>())?;
    println!("{name:<24} {:.5}", smoothness_score(&trace)?.aggregate);
    Ok(())
}

fn main() -> pave::Result<()> {
    let spectrum = fft_real(&[1.0, 0.0, 0.0, 0.0])?;
    println!("impulse spectrum: {spectrum:?}\n");

    let n = 200;
    let t = |i: usize| i as f64 * 0.05;
    score("constant", vec![0.7; n])?;
    score("sine 0.5 Hz", (0..n).map(|i| (2.0 * PI * 0.5 * t(i)).sin()).collect())?;
    score("sine 1 Hz", (0..n).map(|i| (2.0 * PI * t(i)).sin()).collect())?;
    score(
        "sine 0.5 Hz + dither",
        (0..n)
            .map(|i| (2.0 * PI * 0.5 * t(i)).sin() + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect(),
    )?;
    score("bang-bang", (0..n).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect())?;
    Ok(())
}
