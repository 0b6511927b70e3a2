//! Quick runtime oracle checks, run by the `selftest` subcommand.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::autodiff::{CriticNetwork, Graph, ParamVector};
use crate::error::Result;
use crate::geometry::QuadraticCritic;
use crate::metrics::fft_real;
use crate::regularizers::{mpr_loss, PaveHyperParams, PaveRegularizer};
use crate::td3::{AuxiliaryLoss, BatchNodes};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn jacobian_vs_fd(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(1..=5);
        let d = rng.random_range(1..=5);
        let q = QuadraticCritic::random_negative_definite(k, d, rng);
        let s: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let j = q.implicit_policy_jacobian(&s)?.j;
        let h = 1e-5;
        for col in 0..k {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[col] += h;
            sm[col] -= h;
            let (ap, am) = (q.optimal_action(&sp)?, q.optimal_action(&sm)?);
            for row in 0..d {
                let fd = (ap[row] - am[row]) / (2.0 * h);
                worst = worst.max((fd - j[[row, col]]).abs() / j[[row, col]].abs().max(1.0));
            }
        }
    }
    Ok(check("policy jacobian vs finite differences", worst < 1e-5, format!("max rel err {worst:.2e}")))
}

fn scalar_bound_attained() -> Result<CheckResult> {
    let q = QuadraticCritic::new(
        0.0,
        ndarray::array![0.0],
        ndarray::array![0.0],
        Array2::zeros((1, 1)),
        ndarray::array![[4.0]],
        ndarray::array![[-2.0]],
    )?;
    let r = q.lipschitz_bound_check(100, 1.0, &mut ChaCha8Rng::seed_from_u64(1))?;
    let ok = r.violations == 0 && (r.max_ratio - r.bound).abs() < 1e-10 && (r.bound - 2.0).abs() < 1e-12;
    Ok(check("lipschitz bound attained in 1-d", ok, format!("ratio {} bound {}", r.max_ratio, r.bound)))
}

fn mpr_bilinear(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let b = Array2::from_shape_fn((3, 2), |_| rng.random_range(-2.0..2.0));
    let fro2: f64 = b.iter().map(|x| x * x).sum();
    let q = QuadraticCritic::bilinear(b);
    let sigma = 1e-3;
    let n = 20_000;
    let mut g = Graph::new();
    let s = g.leaf(Array2::zeros((n, 3)));
    let a = g.leaf(Array2::zeros((n, 2)));
    let l = mpr_loss(&mut g, &q, s, a, sigma, rng)?;
    let ratio = g.scalar(l)? / (sigma * sigma) / fro2;
    Ok(check("mixed-partial loss on bilinear critic", (ratio - 1.0).abs() < 0.05, format!("ratio {ratio:.4}")))
}

fn hutchinson_enumeration() -> CheckResult {
    let c = ndarray::array![[-2.0, 0.3, 0.1], [0.3, -1.0, 0.5], [0.1, 0.5, 0.7]];
    let d = 3;
    let mut total = 0.0;
    for mask in 0..(1u32 << d) {
        let v: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        for i in 0..d {
            for j in 0..d {
                total += v[i] * c[[i, j]] * v[j];
            }
        }
    }
    let mean = total / f64::from(1u32 << d);
    let tr = c.diag().sum();
    check("rademacher quadratic form enumeration", (mean - tr).abs() < 1e-12, format!("{mean} vs {tr}"))
}

fn fft_vs_dft(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fft_real(&x)?;
        for (k, f) in fast.iter().enumerate() {
            let slow: Complex64 = x
                .iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -2.0 * PI * (k * t) as f64 / 64.0))
                .sum();
            worst = worst.max((f - slow).norm());
        }
    }
    Ok(check("fft vs direct transform", worst < 1e-9, format!("max abs err {worst:.2e}")))
}

fn second_order_gradient(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let critic = CriticNetwork::new(3, 2, &[6], rng)?;
    let s = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
    let a = Array2::from_shape_fn((4, 2), |_| rng.random_range(-1.0..1.0));
    let loss_at = |p: &ParamVector| -> Result<(f64, ParamVector)> {
        let net = CriticNetwork::from_params(3, 2, p.clone())?;
        let mut g = Graph::new();
        let bound = net.bind(&mut g)?;
        let sn = g.leaf(s.clone());
        let an = g.leaf(a.clone());
        let l = mpr_loss(&mut g, &bound, sn, an, 0.3, &mut ChaCha8Rng::seed_from_u64(9))?;
        let grad = bound.param_gradient(&mut g, l)?;
        Ok((g.scalar(l)?, grad))
    };
    let p0 = critic.params().clone();
    let (_, grad) = loss_at(&p0)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let i = rng.random_range(0..p0.len());
        let mut pp = p0.clone();
        let mut pm = p0.clone();
        pp.values_mut()[i] += h;
        pm.values_mut()[i] -= h;
        let fd = (loss_at(&pp)?.0 - loss_at(&pm)?.0) / (2.0 * h);
        let an = grad.values()[i];
        worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-6));
    }
    Ok(check("second-order parameter gradient", worst < 1e-4, format!("max rel err {worst:.2e}")))
}

fn counter_per_update() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hp = PaveHyperParams {
        n_rademacher: 2,
        ..PaveHyperParams::pendulum()
    };
    let mut counts = Vec::new();
    for (k, d) in [(3, 3), (8, 8), (16, 16)] {
        let critic = CriticNetwork::new(k, d, &[8], &mut rng)?;
        let mut reg = PaveRegularizer::new(hp.clone(), 1, 2)?;
        let mut g = Graph::new();
        let bound = critic.bind(&mut g)?;
        let batch = BatchNodes {
            s: g.leaf(Array2::zeros((5, k))),
            a: g.leaf(Array2::zeros((5, d))),
            s_next: g.leaf(Array2::zeros((5, k))),
            rows: 5,
        };
        reg.build(&mut g, &bound, &batch)?;
        counts.push(g.stats.input_grad_evals);
    }
    let want = 2 + 2 + 2 * hp.n_rademacher;
    Ok(check(
        "action-gradient evaluations per update",
        counts.iter().all(|&c| c == want),
        format!("{counts:?}, expected {want}"),
    ))
}

pub fn run_selftest(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        jacobian_vs_fd(&mut rng)?,
        scalar_bound_attained()?,
        mpr_bilinear(&mut rng)?,
        hutchinson_enumeration(),
        fft_vs_dft(&mut rng)?,
        second_order_gradient(&mut rng)?,
        counter_per_update()?,
    ])
}
