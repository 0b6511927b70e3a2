//! Finite-difference checks of first and second order gradients.

use ndarray::{array, Array2};
use pave::autodiff::{action_gradient, hvp_action, CriticNetwork, Graph, Matrix, NodeId, ParamVector, HVP_FD_EPS};
use pave::geometry::QuadraticCritic;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central difference of a scalar function of a matrix, entry by entry.
fn fd_matrix(x: &Matrix, h: f64, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut out = Array2::zeros(x.dim());
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[[r, c]] += h;
        xm[[r, c]] -= h;
        out[[r, c]] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    out
}

type Builder = fn(&mut Graph, NodeId, NodeId) -> NodeId;

/// Small graphs exercising every op, each reducing to a scalar.
fn builders() -> Vec<(&'static str, Builder)> {
    vec![
        ("matmul", |g, x, w| {
            let y = g.matmul(x, w).unwrap();
            let y = g.square(y);
            g.sum(y)
        }),
        ("matmul_ta", |g, x, w| {
            let xx = g.matmul_t(x, x, true, false).unwrap();
            let y = g.matmul(xx, w).unwrap();
            let y = g.tanh(y);
            g.sum(y)
        }),
        ("matmul_tb", |g, _x, w| {
            let ww = g.matmul_t(w, w, false, true).unwrap();
            let y = g.silu(ww);
            g.mean(y)
        }),
        ("matmul_both", |g, x, w| {
            let y = g.matmul_t(w, x, true, true).unwrap();
            let y = g.silu(y);
            let y = g.mul(y, y).unwrap();
            g.sum(y)
        }),
        ("add_sub_mul", |g, x, _| {
            let y = g.square(x);
            let z = g.sub(y, x).unwrap();
            let z = g.add(z, y).unwrap();
            let z = g.mul(z, x).unwrap();
            g.sum(z)
        }),
        ("scale_offset", |g, x, _| {
            let y = g.scale(x, -1.7);
            let y = g.offset(y, 0.3);
            let y = g.silu(y);
            g.sum(y)
        }),
        ("relu", |g, x, _| {
            let y = g.relu(x);
            let y = g.square(y);
            g.mean(y)
        }),
        ("reductions", |g, x, _| {
            let r = g.sum_rows(x);
            let c = g.sum_cols(x);
            let r2 = g.square(r);
            let c2 = g.tanh(c);
            let a = g.sum(r2);
            let b = g.sum(c2);
            g.add(a, b).unwrap()
        }),
        ("broadcast", |g, x, _| {
            let (rows, cols) = g.shape(x);
            let r = g.sum_rows(x);
            let rb = g.broadcast(r, rows, cols).unwrap();
            let p = g.mul(rb, x).unwrap();
            let s = g.sum(p);
            let sb = g.broadcast(s, rows, cols).unwrap();
            let q = g.mul(sb, x).unwrap();
            let q = g.silu(q);
            g.sum(q)
        }),
        ("add_row", |g, x, w| {
            let row = g.sum_rows(w);
            let row = g.scale(row, 0.1);
            let y = g.matmul(x, w).unwrap();
            let y = g.add_row(y, row).unwrap();
            let y = g.silu(y);
            g.sum(y)
        }),
    ]
}

fn eval(b: Builder, x: &Matrix, w: &Matrix) -> f64 {
    let mut g = Graph::new();
    let xn = g.leaf(x.clone());
    let wn = g.leaf(w.clone());
    let out = b(&mut g, xn, wn);
    g.scalar(out).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_op_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        for (name, b) in builders() {
            let mut g = Graph::new();
            let xn = g.leaf(x.clone());
            let wn = g.leaf(w.clone());
            let out = b(&mut g, xn, wn);
            let grads = g.grad(out, &[xn, wn]).unwrap();
            let gx = g.value(grads[0]).clone();
            let gw = g.value(grads[1]).clone();
            let fx = fd_matrix(&x, 1e-6, |xp| eval(b, xp, &w));
            let fw = fd_matrix(&w, 1e-6, |wp| eval(b, &x, wp));
            for (a, f) in gx.iter().zip(&fx).chain(gw.iter().zip(&fw)) {
                // relu kinks are measure-zero for random inputs
                prop_assert!(rel(*a, *f) < 1e-6 || (a - f).abs() < 1e-9, "{name}: {a} vs {f}");
            }
        }
    }
}

fn critic(k: usize, d: usize, hidden: &[usize], seed: u64) -> CriticNetwork {
    CriticNetwork::new(k, d, hidden, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn action_gradient_matches_finite_differences() {
    let net = critic(3, 2, &[8, 8], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = net.action_gradient(&s, &a).unwrap();
        for j in 0..2 {
            let h = 1e-4;
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[j] += h;
            am[j] -= h;
            let fd = (net.forward(&s, &ap).unwrap() - net.forward(&s, &am).unwrap()) / (2.0 * h);
            assert!(rel(grad[j], fd) < 1e-6, "{} vs {fd}", grad[j]);
        }
    }
}

#[test]
fn quadratic_adapter_gradient_is_closed_form() {
    let q = QuadraticCritic::new(
        0.5,
        array![0.1, -0.2],
        array![1.0, 0.3],
        array![[1.0, 0.2], [0.2, -0.5]],
        array![[2.0, -1.0], [0.5, 0.0]],
        array![[-2.0, 0.4], [0.4, -1.0]],
    )
    .unwrap();
    let s = array![[0.3, -0.7]];
    let a = array![[0.2, 0.9]];
    let mut g = Graph::new();
    let sn = g.leaf(s.clone());
    let an = g.leaf(a.clone());
    let grad = action_gradient(&mut g, &q, sn, an).unwrap();
    let exact = &q.g_a + &s.row(0).dot(&q.b) + &q.c_aa.dot(&a.row(0));
    for (x, y) in g.value(grad).iter().zip(exact.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}

/// Value of `loss(params)` and its exact parameter gradient.
fn loss_and_grad(
    k: usize,
    d: usize,
    p: &ParamVector,
    build: &dyn Fn(&mut Graph, &dyn pave::autodiff::CriticModel) -> NodeId,
) -> (f64, ParamVector) {
    let net = CriticNetwork::from_params(k, d, p.clone()).unwrap();
    let mut g = Graph::new();
    let bound = net.bind(&mut g).unwrap();
    let loss = build(&mut g, &bound);
    let grad = bound.param_gradient(&mut g, loss).unwrap();
    (g.scalar(loss).unwrap(), grad)
}

fn check_param_gradient(
    k: usize,
    d: usize,
    seed: u64,
    tol: f64,
    build: &dyn Fn(&mut Graph, &dyn pave::autodiff::CriticModel) -> NodeId,
) {
    let p0 = critic(k, d, &[6, 5], seed).params().clone();
    let (_, grad) = loss_and_grad(k, d, &p0, build);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let h = 1e-5;
    for _ in 0..30 {
        let i = rng.random_range(0..p0.len());
        let mut pp = p0.clone();
        let mut pm = p0.clone();
        pp.values_mut()[i] += h;
        pm.values_mut()[i] -= h;
        let fd = (loss_and_grad(k, d, &pp, build).0 - loss_and_grad(k, d, &pm, build).0) / (2.0 * h);
        let an = grad.values()[i];
        assert!(rel(an, fd) < tol || (an - fd).abs() < 1e-10, "param {i}: {an} vs {fd}");
    }
}

fn batch(k: usize, d: usize, n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..1.0)),
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0)),
    )
}

#[test]
fn q_value_parameter_gradient() {
    let (s, a) = batch(3, 2, 4, 7);
    check_param_gradient(3, 2, 3, 1e-5, &|g, c| {
        let sn = g.leaf(s.clone());
        let an = g.leaf(a.clone());
        let q = c.q_node(g, sn, an).unwrap();
        g.mean(q)
    });
}

#[test]
fn squared_action_gradient_parameter_gradient() {
    let (s, a) = batch(3, 2, 4, 8);
    check_param_gradient(3, 2, 4, 1e-4, &|g, c| {
        let sn = g.leaf(s.clone());
        let an = g.leaf(a.clone());
        let ga = action_gradient(g, c, sn, an).unwrap();
        let sq = g.square(ga);
        g.sum(sq)
    });
}

#[test]
fn hvp_parameter_gradient() {
    let (s, a) = batch(2, 3, 3, 9);
    let v = array![[1.0, -1.0, 1.0], [-1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];
    check_param_gradient(2, 3, 5, 1e-4, &|g, c| {
        let sn = g.leaf(s.clone());
        let an = g.leaf(a.clone());
        let vn = g.leaf(v.clone());
        let hv = hvp_action(g, c, sn, an, vn, HVP_FD_EPS).unwrap();
        let p = g.mul(hv, vn).unwrap();
        let p = g.offset(p, 0.7);
        let p = g.relu(p);
        g.sum(p)
    });
}

#[test]
fn hvp_on_quadratic_is_hessian_times_v() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let q = QuadraticCritic::random_negative_definite(3, 4, &mut rng);
    let s = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
    let a = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
    let v = Array2::from_shape_fn((5, 4), |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let mut g = Graph::new();
    let (sn, an, vn) = (g.leaf(s), g.leaf(a), g.leaf(v.clone()));
    let hv = hvp_action(&mut g, &q, sn, an, vn, HVP_FD_EPS).unwrap();
    let exact = v.dot(&q.c_aa);
    for (x, y) in g.value(hv).iter().zip(exact.iter()) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn parameter_gradient_is_linear_in_the_loss() {
    let net = critic(3, 2, &[6], 12);
    let (s, a) = batch(3, 2, 4, 13);
    let (alpha, beta) = (0.7, -2.3);
    let grads = |mode: u8| {
        let mut g = Graph::new();
        let bound = net.bind(&mut g).unwrap();
        let sn = g.leaf(s.clone());
        let an = g.leaf(a.clone());
        let q = pave::autodiff::CriticModel::q_node(&bound, &mut g, sn, an).unwrap();
        let l1 = g.mean(q);
        let ga = action_gradient(&mut g, &bound, sn, an).unwrap();
        let sq = g.square(ga);
        let l2 = g.sum(sq);
        let loss = match mode {
            0 => l1,
            1 => l2,
            _ => {
                let x = g.scale(l1, alpha);
                let y = g.scale(l2, beta);
                g.add(x, y).unwrap()
            }
        };
        bound.param_gradient(&mut g, loss).unwrap()
    };
    let (g1, g2, g12) = (grads(0), grads(1), grads(2));
    for i in 0..g1.len() {
        let combined = alpha * g1.values()[i] + beta * g2.values()[i];
        assert!((g12.values()[i] - combined).abs() <= 1e-12 * combined.abs().max(1.0));
    }
}

#[test]
fn losses_and_gradients_are_bit_identical_across_runs() {
    let run = || {
        let net = critic(3, 1, &[8, 8], 21);
        let (s, a) = batch(3, 1, 6, 22);
        let mut g = Graph::new();
        let bound = net.bind(&mut g).unwrap();
        let sn = g.leaf(s);
        let an = g.leaf(a);
        let ga = action_gradient(&mut g, &bound, sn, an).unwrap();
        let sq = g.square(ga);
        let loss = g.sum(sq);
        let grad = bound.param_gradient(&mut g, loss).unwrap();
        (g.scalar(loss).unwrap().to_bits(), grad.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn text_export_round_trips() {
    let p = critic(3, 1, &[4], 30).params().clone();
    let mut buf = Vec::new();
    pave::autodiff::io::write_params_text(&mut buf, &p).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), p.len());
    let back = pave::autodiff::io::read_params_text(&buf[..], p.layout().to_vec()).unwrap();
    assert_eq!(back, p);
}
