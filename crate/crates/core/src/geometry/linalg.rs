//! Small dense symmetric eigenproblems, spectral norms and SPD solves.

use ndarray::{Array1, Array2};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;

fn check_square(m: &Matrix, what: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            what,
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = check_square(m, "symmetric matrix")?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric_eigen input"));
    }
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        vectors.column_mut(col).assign(&v.column(i));
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    let (vals, _) = symmetric_eigen(m)?;
    vals.last().copied().ok_or(Error::InvalidArgument("empty matrix".into()))
}

pub const POWER_ITERATIONS: usize = 200;

/// Largest singular value by power iteration on `M^T M`.
///
/// Stops after [`POWER_ITERATIONS`] iterations or once the estimate changes
/// by less than `1e-10` relative.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral_norm input"));
    }
    let n = m.ncols();
    if n == 0 || m.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let gram = m.t().dot(m);
    // Deterministic start with unequal entries so it is not orthogonal to a
    // coordinate-aligned top singular vector.
    let mut v: Array1<f64> = Array1::from_iter((0..n).map(|i| 1.0 + 0.37 * i as f64));
    v /= v.dot(&v).sqrt();
    let mut sigma = m.dot(&v).dot(&m.dot(&v)).sqrt();
    for _ in 0..POWER_ITERATIONS {
        let w = gram.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            // start vector fell into the null space; restart on a basis vector
            v = Array1::zeros(n);
            v[n - 1] = 1.0;
            continue;
        }
        v = w / norm;
        let mv = m.dot(&v);
        let next = mv.dot(&mv).sqrt();
        let done = (next - sigma).abs() <= 1e-10 * next;
        sigma = next;
        if done {
            break;
        }
    }
    Ok(sigma)
}

/// Solve `A X = B` for symmetric positive definite `A` by Cholesky factorization.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = check_square(a, "SPD matrix")?;
    if b.nrows() != n {
        return Err(Error::Dimension {
            what: "right-hand side rows",
            expected: n,
            got: b.nrows(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::InvalidArgument("matrix is not positive definite".into()));
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    let mut x = b.clone();
    for col in 0..b.ncols() {
        // forward: L y = b
        for i in 0..n {
            let mut sum = x[[i, col]];
            for k in 0..i {
                sum -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = sum / l[[i, i]];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut sum = x[[i, col]];
            for k in i + 1..n {
                sum -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = sum / l[[i, i]];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectral_norm_basics() {
        assert!((spectral_norm(&Array2::eye(3)).unwrap() - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&array![[3.0, 0.0], [0.0, -5.0]]).unwrap() - 5.0).abs() < 1e-10);
        assert_eq!(spectral_norm(&Array2::zeros((2, 3))).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
            let (vals, _) = symmetric_eigen(&m.t().dot(&m)).unwrap();
            let exact = vals.last().unwrap().sqrt();
            let est = spectral_norm(&m).unwrap();
            assert!((est - exact).abs() < 1e-8, "{est} vs {exact}");
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = array![[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, -3.0]];
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = Array2::from_diag(&Array1::from(vals));
        let back = vecs.dot(&d).dot(&vecs.t());
        for (x, y) in back.iter().zip(m.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_solve() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x = solve_spd(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        assert!(solve_spd(&array![[-1.0]], &array![[1.0]]).is_err());
    }
}
