use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::linalg::{max_eigenvalue, solve_spd, spectral_norm};
use super::ActionValue;
use crate::autodiff::mlp::check_batch;
use crate::autodiff::{BindCritic, CriticModel, Graph, Matrix, NodeId};
use crate::error::{Error, Result};

/// `Q(s, a) = c + g_s.s + g_a.a + 1/2 s'As + s'Ba + 1/2 a'Ca`.
///
/// `A` (`k x k`) and `C` (`d x d`) are symmetric, `B` is `k x d`. The action
/// Hessian is `C` and the mixed partial `d(grad_a Q)/ds` is `B^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCritic {
    pub c: f64,
    pub g_s: Array1<f64>,
    pub g_a: Array1<f64>,
    pub a: Matrix,
    pub b: Matrix,
    pub c_aa: Matrix,
}

/// Serializable form used by quadratic spec files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub g_s: Vec<f64>,
    #[serde(default)]
    pub g_a: Vec<f64>,
    #[serde(default)]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c_aa: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianReport {
    /// `d x k` policy Jacobian.
    pub j: Matrix,
    /// Spectral norm of the mixed partial.
    pub m: f64,
    /// `|lambda_max|` of the action Hessian.
    pub mu: f64,
    pub bound: f64,
    pub j_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub bound: f64,
}

fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    m.nrows() == m.ncols()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[[i, j]] - m[[j, i]]).abs() <= 1e-12 * scale))
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &'static str) -> Result<Matrix> {
    if rows.is_empty() && nrows * ncols == 0 {
        return Ok(Array2::zeros((nrows, ncols)));
    }
    if rows.len() != nrows {
        return Err(Error::Dimension {
            what,
            expected: nrows,
            got: rows.len(),
        });
    }
    let mut m = Array2::zeros((nrows, ncols));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Dimension {
                what,
                expected: ncols,
                got: r.len(),
            });
        }
        for (j, &v) in r.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

impl QuadraticCritic {
    pub fn new(c: f64, g_s: Array1<f64>, g_a: Array1<f64>, a: Matrix, b: Matrix, c_aa: Matrix) -> Result<Self> {
        let k = g_s.len();
        let d = g_a.len();
        if a.dim() != (k, k) {
            return Err(Error::Shape {
                op: "quadratic A",
                lhs: (k, k),
                rhs: a.dim(),
            });
        }
        if b.dim() != (k, d) {
            return Err(Error::Shape {
                op: "quadratic B",
                lhs: (k, d),
                rhs: b.dim(),
            });
        }
        if c_aa.dim() != (d, d) {
            return Err(Error::Shape {
                op: "quadratic C",
                lhs: (d, d),
                rhs: c_aa.dim(),
            });
        }
        if !is_symmetric(&a) || !is_symmetric(&c_aa) {
            return Err(Error::InvalidArgument("A and C must be symmetric".into()));
        }
        Ok(Self { c, g_s, g_a, a, b, c_aa })
    }

    /// Pure coupling `Q = s'Ba` with `C = 0`.
    pub fn bilinear(b: Matrix) -> Self {
        let (k, d) = b.dim();
        Self {
            c: 0.0,
            g_s: Array1::zeros(k),
            g_a: Array1::zeros(d),
            a: Array2::zeros((k, k)),
            b,
            c_aa: Array2::zeros((d, d)),
        }
    }

    pub fn from_spec(spec: &QuadraticSpec) -> Result<Self> {
        let k = spec.b.len();
        let d = spec.c_aa.len();
        let g_s = if spec.g_s.is_empty() { vec![0.0; k] } else { spec.g_s.clone() };
        let g_a = if spec.g_a.is_empty() { vec![0.0; d] } else { spec.g_a.clone() };
        let a = if spec.a.is_empty() {
            Array2::zeros((k, k))
        } else {
            rows_to_matrix(&spec.a, k, k, "quadratic A")?
        };
        Self::new(
            spec.c,
            Array1::from(g_s),
            Array1::from(g_a),
            a,
            rows_to_matrix(&spec.b, k, d, "quadratic B")?,
            rows_to_matrix(&spec.c_aa, d, d, "quadratic C")?,
        )
    }

    /// Random instance with a negative definite action Hessian whose
    /// eigenvalues lie in `[-4, -0.5]`.
    pub fn random_negative_definite<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Self {
        let mut normal = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| StandardNormal.sample(rng));
        let sym = |m: Matrix| (&m + &m.t()) * 0.5;
        let a = sym(normal(k, k));
        let b = normal(k, d);
        let q = normal(d, d);
        // orthonormal basis by modified Gram-Schmidt
        let mut basis = q.clone();
        for j in 0..d {
            for p in 0..j {
                let proj = basis.column(j).dot(&basis.column(p));
                let col_p = basis.column(p).to_owned();
                basis.column_mut(j).scaled_add(-proj, &col_p);
            }
            let n = basis.column(j).dot(&basis.column(j)).sqrt();
            basis.column_mut(j).mapv_inplace(|v| v / n);
        }
        let eig: Vec<f64> = (0..d).map(|_| -rng.random_range(0.5..4.0)).collect();
        let c_aa = sym(basis.dot(&Array2::from_diag(&Array1::from(eig))).dot(&basis.t()));
        let g_s = Array1::from_shape_fn(k, |_| StandardNormal.sample(rng));
        let g_a = Array1::from_shape_fn(d, |_| StandardNormal.sample(rng));
        let c: f64 = StandardNormal.sample(rng);
        Self { c, g_s, g_a, a, b, c_aa }
    }

    pub fn state_dim(&self) -> usize {
        self.g_s.len()
    }

    pub fn action_dim(&self) -> usize {
        self.g_a.len()
    }

    /// `d x k` mixed partial `d(grad_a Q)/ds`.
    pub fn mixed_partial(&self) -> Matrix {
        self.b.t().to_owned()
    }

    fn check(&self, s: &[f64], a: &[f64]) -> Result<()> {
        if s.len() != self.state_dim() {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim(),
                got: s.len(),
            });
        }
        if a.len() != self.action_dim() {
            return Err(Error::Dimension {
                what: "action",
                expected: self.action_dim(),
                got: a.len(),
            });
        }
        Ok(())
    }

    /// Largest eigenvalue of `C`, or an error when it is not negative.
    pub fn check_negative_definite(&self) -> Result<f64> {
        let lmax = max_eigenvalue(&self.c_aa)?;
        if lmax >= 0.0 {
            return Err(Error::NotNegativeDefinite(lmax));
        }
        Ok(lmax)
    }

    /// `a*(s) = -C^{-1}(g_a + B^T s)`.
    pub fn optimal_action(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check(s, &vec![0.0; self.action_dim()])?;
        self.check_negative_definite()?;
        let rhs = &self.g_a + &self.b.t().dot(&ArrayView1::from(s));
        let neg_c = -&self.c_aa;
        let x = solve_spd(&neg_c, &rhs.insert_axis(ndarray::Axis(1)))?;
        Ok(x.into_iter().collect())
    }

    /// Policy Jacobian `J = -C^{-1} B^T`, constant in `s` for a quadratic.
    pub fn implicit_policy_jacobian(&self, s: &[f64]) -> Result<JacobianReport> {
        self.check(s, &vec![0.0; self.action_dim()])?;
        let lmax = self.check_negative_definite()?;
        let neg_c = -&self.c_aa;
        let j = solve_spd(&neg_c, &self.mixed_partial())?;
        let m = spectral_norm(&self.mixed_partial())?;
        let mu = lmax.abs();
        let j_norm = spectral_norm(&j)?;
        Ok(JacobianReport {
            j,
            m,
            mu,
            bound: m / mu,
            j_norm,
        })
    }

    /// Sample `n_pairs` state pairs uniformly in the ball of `radius` and
    /// count violations of `|a*(s) - a*(s')| <= (M/mu)|s - s'|(1 + 1e-8)`.
    pub fn lipschitz_bound_check<R: Rng + ?Sized>(
        &self,
        n_pairs: usize,
        radius: f64,
        rng: &mut R,
    ) -> Result<LipschitzReport> {
        let report = self.implicit_policy_jacobian(&vec![0.0; self.state_dim()])?;
        let k = self.state_dim();
        let sample = |rng: &mut R| -> Vec<f64> {
            let dir: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
            dir.into_iter().map(|x| x / n * r).collect()
        };
        let mut violations = 0;
        let mut max_ratio = 0.0f64;
        for _ in 0..n_pairs {
            let s1 = sample(rng);
            let s2 = sample(rng);
            let ds = s1.iter().zip(&s2).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if ds == 0.0 {
                continue;
            }
            let a1 = self.optimal_action(&s1)?;
            let a2 = self.optimal_action(&s2)?;
            let da = a1.iter().zip(&a2).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if da > report.bound * ds * (1.0 + 1e-8) {
                violations += 1;
            }
            max_ratio = max_ratio.max(da / ds);
        }
        Ok(LipschitzReport {
            pairs: n_pairs,
            violations,
            max_ratio,
            bound: report.bound,
        })
    }
}

impl ActionValue for QuadraticCritic {
    fn state_dim(&self) -> usize {
        self.g_s.len()
    }

    fn action_dim(&self) -> usize {
        self.g_a.len()
    }

    fn value(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        self.check(s, a)?;
        let s = ArrayView1::from(s);
        let a = ArrayView1::from(a);
        Ok(self.c
            + self.g_s.dot(&s)
            + self.g_a.dot(&a)
            + 0.5 * s.dot(&self.a.dot(&s))
            + s.dot(&self.b.dot(&a))
            + 0.5 * a.dot(&self.c_aa.dot(&a)))
    }

    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.check(s, a)?;
        let g = &self.g_a + &self.b.t().dot(&ArrayView1::from(s)) + self.c_aa.dot(&ArrayView1::from(a));
        Ok(g.into_iter().collect())
    }
}

impl CriticModel for QuadraticCritic {
    fn state_dim(&self) -> usize {
        self.g_s.len()
    }

    fn action_dim(&self) -> usize {
        self.g_a.len()
    }

    fn q_node(&self, g: &mut Graph, s: NodeId, a: NodeId) -> Result<NodeId> {
        let n = check_batch(g, self.state_dim(), self.action_dim(), s, a)?;
        let quad_form = |g: &mut Graph, x: NodeId, m: &Matrix| -> Result<NodeId> {
            let mn = g.leaf(m.clone());
            let xm = g.matmul(x, mn)?;
            let prod = g.mul(xm, x)?;
            Ok(g.sum_cols(prod))
        };
        let gs = g.leaf(self.g_s.clone().insert_axis(ndarray::Axis(1)));
        let ga = g.leaf(self.g_a.clone().insert_axis(ndarray::Axis(1)));
        let lin_s = g.matmul(s, gs)?;
        let lin_a = g.matmul(a, ga)?;
        let ss = quad_form(g, s, &self.a)?;
        let ss = g.scale(ss, 0.5);
        let aa = quad_form(g, a, &self.c_aa)?;
        let aa = g.scale(aa, 0.5);
        let bn = g.leaf(self.b.clone());
        let sb = g.matmul(s, bn)?;
        let sba = g.mul(sb, a)?;
        let cross = g.sum_cols(sba);
        let mut q = g.add(lin_s, lin_a)?;
        q = g.add(q, ss)?;
        q = g.add(q, aa)?;
        q = g.add(q, cross)?;
        let c = g.leaf(Array2::from_elem((n, 1), self.c));
        g.add(q, c)
    }
}

impl BindCritic for QuadraticCritic {
    fn bind_model<'a>(&'a self, _g: &mut Graph) -> Result<Box<dyn CriticModel + 'a>> {
        Ok(Box::new(self))
    }
}
