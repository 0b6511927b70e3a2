//! Reproducible seeding: every random consumer draws from its own stream.
//!
//! ```text
//! cargo run --release --example seeded_streams
//! ```

use pave::harness::{derive_seed, splitmix64, Stream};

fn main() {
    println!("splitmix64(0) = {:#018x}", splitmix64(0));
    for stream in [Stream::Init, Stream::Env, Stream::Exploration, Stream::Replay, Stream::Perturbation, Stream::Rademacher] {
        println!("{:<14} seed 0 -> {:#018x}   seed 1 -> {:#018x}", format!("{stream:?}"), derive_seed(0, stream), derive_seed(1, stream));
    }
}
