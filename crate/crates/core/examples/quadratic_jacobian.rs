//! Implicit policy Jacobian of quadratic critics and the `M/mu` Lipschitz bound.
//!
//! ```text
//! cargo run --release --example quadratic_jacobian
//! ```

use pave::geometry::QuadraticCritic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> pave::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // a*(s) = 2s for C = [-2], B = [4]: the bound M/mu = 4/2 is attained
    let scalar = QuadraticCritic::new(
        0.0,
        ndarray::array![0.0],
        ndarray::array![0.0],
        ndarray::Array2::zeros((1, 1)),
        ndarray::array![[4.0]],
        ndarray::array![[-2.0]],
    )?;
    let r = scalar.implicit_policy_jacobian(&[0.3])?;
    let l = scalar.lipschitz_bound_check(1000, 1.0, &mut rng)?;
    println!("scalar: J = {:.3}, M = {}, mu = {}, bound = {}, max ratio = {:.12}", r.j[[0, 0]], r.m, r.mu, r.bound, l.max_ratio);

    println!("\n  k  d   |J|      M/mu     max ratio  violations  fd err");
    for _ in 0..8 {
        let k = rng.random_range(1..=8);
        let d = rng.random_range(1..=8);
        let q = QuadraticCritic::random_negative_definite(k, d, &mut rng);
        let s: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rep = q.implicit_policy_jacobian(&s)?;

        let h = 1e-5;
        let mut fd_err = 0.0f64;
        for col in 0..k {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[col] += h;
            sm[col] -= h;
            let (ap, am) = (q.optimal_action(&sp)?, q.optimal_action(&sm)?);
            for row in 0..d {
                let fd = (ap[row] - am[row]) / (2.0 * h);
                fd_err = fd_err.max((fd - rep.j[[row, col]]).abs());
            }
        }
        let lip = q.lipschitz_bound_check(1000, 1.0, &mut rng)?;
        println!(
            "{k:>3} {d:>2}  {:>7.3}  {:>7.3}  {:>9.3}  {:>10}  {fd_err:.1e}",
            rep.j_norm, rep.bound, lip.max_ratio, lip.violations
        );
    }
    Ok(())
}
