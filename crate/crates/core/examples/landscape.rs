//! Mixed-partial landscapes.
//!
//! Without arguments, scans a bilinear critic, whose landscape is flat at the
//! coupling norm of the chosen state axis. With one or two checkpoint paths,
//! scans their first critic around the hanging state; the second checkpoint
//! reuses the axes picked on the first.
//!
//! ```text
//! cargo run --release --example landscape
//! cargo run --release --example landscape -- runs/base/seed_0/checkpoints/step_0030000.ckpt \
//!     runs/pave/seed_0/checkpoints/step_0030000.ckpt
//! ```

use std::path::Path;

use ndarray::array;
use pave::geometry::{dominant_axis_selection, mixed_partial_landscape, LandscapeConfig, QuadraticCritic};
use pave::harness::{probe_network, ExperimentConfig};
use pave::td3::Checkpoint;

fn main() -> pave::Result<()> {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    if paths.is_empty() {
        let b = array![[0.0, 0.5], [3.0, -4.0], [1.0, 0.0]];
        let q = QuadraticCritic::bilinear(b.clone());
        let (s0, a0) = ([0.1, -0.2, 0.3], [0.0, 0.0]);
        let axes = dominant_axis_selection(&q, &s0, &a0, 1e-3)?;
        let grid = mixed_partial_landscape(&q, &s0, &a0, axes, &LandscapeConfig { grid_n: 11, ..Default::default() })?;
        let row = b.row(axes.0);
        let exact = row.dot(&row).sqrt();
        let spread = grid.max() - grid.values.iter().copied().fold(f64::INFINITY, f64::min);
        println!("axes {axes:?}: mean {:.9}, spread {spread:.2e}, exact {exact}", grid.mean());
        return Ok(());
    }

    let cfg = ExperimentConfig::preset("pendulum-pave")?;
    let mut axes = None;
    for p in &paths {
        let ckpt = Checkpoint::load(Path::new(p))?;
        let probe = probe_network(&ckpt.critics[0], axes, &cfg.env, &cfg.probe)?;
        axes.get_or_insert(probe.axes);
        println!("{p}\n  axes s{} a{}: mean {:.4}, max {:.4}", probe.axes.0, probe.axes.1, probe.grid.mean(), probe.grid.max());
    }
    Ok(())
}
