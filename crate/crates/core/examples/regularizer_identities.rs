//! The three critic regularizers on critics where their values are known.
//!
//! For `Q = s'Ba` the mixed-partial loss divided by `sigma^2` tends to
//! `|B|_F^2`, and the vector-field loss of one transition is `|B^T (s' - s)|^2`.
//! The curvature hinge on an indefinite `C` is compared with an enumeration
//! over all four sign vectors.
//!
//! ```text
//! cargo run --release --example regularizer_identities
//! ```

use ndarray::{array, Array2};
use pave::autodiff::Graph;
use pave::geometry::QuadraticCritic;
use pave::regularizers::{curv_loss, mpr_loss, sample_rademacher, vfc_loss, RademacherBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pave::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = Array2::from_shape_fn((3, 2), |_| rng.random_range(-2.0..2.0));
    let fro2: f64 = b.iter().map(|x| x * x).sum();
    let q = QuadraticCritic::bilinear(b.clone());

    println!("|B|_F^2 = {fro2:.5}");
    for sigma in [1e-1, 1e-2, 1e-3] {
        let n = 100_000;
        let mut g = Graph::new();
        let s = g.leaf(Array2::zeros((n, 3)));
        let a = g.leaf(Array2::zeros((n, 2)));
        let l = mpr_loss(&mut g, &q, s, a, sigma, &mut rng)?;
        println!("sigma {sigma:<6} L_MPR / sigma^2 = {:.5}", g.scalar(l)? / (sigma * sigma));
    }

    let (s0, s1) = (array![[0.5, -1.0, 2.0]], array![[0.7, -0.5, 1.0]]);
    let ds = &s1 - &s0;
    let closed: f64 = ds.dot(&b).iter().map(|x| x * x).sum();
    let mut g = Graph::new();
    let (sn, sn1, an) = (g.leaf(s0), g.leaf(s1), g.leaf(array![[0.1, 0.2]]));
    let l = vfc_loss(&mut g, &q, sn, sn1, an)?;
    println!("L_VFC = {:.12}, |B^T ds|^2 = {closed:.12}", g.scalar(l)?);

    let curved = QuadraticCritic::new(
        0.0,
        array![0.0],
        array![0.0, 0.0],
        Array2::zeros((1, 1)),
        Array2::zeros((1, 2)),
        array![[-2.0, 0.8], [0.8, 1.0]],
    )?;
    let delta = 0.5;
    let mut brute = 0.0;
    for (x, y) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let vcv: f64 = -2.0 * x * x + 1.6 * x * y + y * y;
        brute += (vcv + delta).max(0.0) / 4.0;
    }
    let all_signs: Vec<RademacherBatch> = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
        .iter()
        .map(|v| RademacherBatch {
            vectors: Array2::from_shape_vec((1, 2), v.to_vec()).unwrap(),
        })
        .collect();
    let mut g = Graph::new();
    let (s, a) = (g.leaf(array![[0.0]]), g.leaf(array![[0.0, 0.0]]));
    let l = curv_loss(&mut g, &curved, s, a, delta, &all_signs, 1e-3)?;
    println!("L_Curv over all sign vectors = {:.9}, enumeration = {brute}", g.scalar(l)?);
    let drawn = sample_rademacher(2, 10_000, &mut rng)?;
    let (s, a) = (g.leaf(Array2::zeros((10_000, 1))), g.leaf(Array2::zeros((10_000, 2))));
    let l = curv_loss(&mut g, &curved, s, a, delta, &[drawn], 1e-3)?;
    println!("L_Curv over 10^4 random draws = {:.4}", g.scalar(l)?);
    Ok(())
}
