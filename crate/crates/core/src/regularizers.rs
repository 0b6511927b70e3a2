//! Critic-side geometric regularizers.
//!
//! All three losses are built from batched action-gradients of the critic,
//! so their parameter gradients need one level of gradient-of-gradient:
//!
//! - mixed-partial: `mean |grad_a Q(s + eps, a) - grad_a Q(s, a)|^2`, `eps ~ N(0, sigma^2 I)`
//! - vector-field consistency: `mean |grad_a Q(s, a) - grad_a Q(s', a)|^2`
//! - curvature: `mean max(0, v' (grad_aa Q) v + delta)` with Rademacher `v`
//!
//! Each costs a fixed number of batched action-gradient evaluations (two,
//! two, and two per Rademacher sample) independent of state and action width.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{action_gradient, hvp_action, CriticModel, Graph, Matrix, NodeId, HVP_FD_EPS};
use crate::error::{Error, Result};
use crate::td3::{AuxKind, AuxiliaryLoss, BatchNodes, LossTerm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaveHyperParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Std of the isotropic state perturbation.
    pub sigma: f64,
    /// Curvature margin.
    pub delta: f64,
    /// Rademacher probes per batch element.
    pub n_rademacher: usize,
    /// Step of the central difference used for Hessian-vector products.
    pub hvp_eps: f64,
}

impl Default for PaveHyperParams {
    fn default() -> Self {
        Self::pendulum()
    }
}

impl PaveHyperParams {
    /// Pendulum weights for the TD3 variant.
    pub fn pendulum() -> Self {
        Self {
            lambda1: 2.0,
            lambda2: 0.005,
            lambda3: 2.0,
            sigma: 0.05,
            delta: 0.1,
            n_rademacher: 1,
            hvp_eps: HVP_FD_EPS,
        }
    }

    /// All weights zero: plain TD3.
    pub fn base() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            ..Self::pendulum()
        }
    }

    pub fn is_base(&self) -> bool {
        self.lambda1 == 0.0 && self.lambda2 == 0.0 && self.lambda3 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("pave.{name} must be >= 0, got {v}")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("pave.sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("pave.delta must be > 0, got {}", self.delta)));
        }
        if self.n_rademacher == 0 {
            return Err(Error::Config("pave.n_rademacher must be >= 1".into()));
        }
        if !(self.hvp_eps > 0.0) {
            return Err(Error::Config("pave.hvp_eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Rows of i.i.d. fair `+-1` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RademacherBatch {
    pub vectors: Matrix,
}

pub fn sample_rademacher<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<RademacherBatch> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("rademacher batch needs d, n >= 1".into()));
    }
    Ok(RademacherBatch {
        vectors: Array2::from_shape_fn((n, d), |_| if rng.random::<bool>() { 1.0 } else { -1.0 }),
    })
}

fn mean_sq_diff(g: &mut Graph, x: NodeId, y: NodeId) -> Result<NodeId> {
    let rows = g.shape(x).0 as f64;
    let diff = g.sub(x, y)?;
    let sq = g.square(diff);
    let total = g.sum(sq);
    Ok(g.scale(total, 1.0 / rows))
}

/// Mixed-partial regularizer with fresh Gaussian state perturbations per row.
pub fn mpr_loss<R: Rng + ?Sized>(
    g: &mut Graph,
    critic: &dyn CriticModel,
    s: NodeId,
    a: NodeId,
    sigma: f64,
    rng: &mut R,
) -> Result<NodeId> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let shape = g.shape(s);
    let eps = if sigma == 0.0 {
        Array2::zeros(shape)
    } else {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Array2::from_shape_fn(shape, |_| normal.sample(rng))
    };
    let eps = g.leaf(eps);
    let s_pert = g.add(s, eps)?;
    let perturbed = action_gradient(g, critic, s_pert, a)?;
    let clean = action_gradient(g, critic, s, a)?;
    mean_sq_diff(g, perturbed, clean)
}

/// Vector-field consistency between consecutive states at the stored action.
pub fn vfc_loss(g: &mut Graph, critic: &dyn CriticModel, s: NodeId, s_next: NodeId, a: NodeId) -> Result<NodeId> {
    let here = action_gradient(g, critic, s, a)?;
    let next = action_gradient(g, critic, s_next, a)?;
    mean_sq_diff(g, here, next)
}

/// Curvature hinge averaged over batch rows and Rademacher probes.
///
/// Each probe batch must have one row per batch element.
pub fn curv_loss(
    g: &mut Graph,
    critic: &dyn CriticModel,
    s: NodeId,
    a: NodeId,
    delta: f64,
    probes: &[RademacherBatch],
    hvp_eps: f64,
) -> Result<NodeId> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    if probes.is_empty() {
        return Err(Error::InvalidArgument("curvature loss needs at least one probe".into()));
    }
    let rows = g.shape(a).0;
    let mut total: Option<NodeId> = None;
    for probe in probes {
        let v = g.leaf(probe.vectors.clone());
        let hv = hvp_action(g, critic, s, a, v, hvp_eps)?;
        let prod = g.mul(hv, v)?;
        let quad = g.sum_cols(prod);
        let shifted = g.offset(quad, delta);
        let hinge = g.relu(shifted);
        let s_h = g.sum(hinge);
        total = Some(match total {
            None => s_h,
            Some(t) => g.add(t, s_h)?,
        });
    }
    let total = total.expect("probes nonempty");
    Ok(g.scale(total, 1.0 / (rows * probes.len()) as f64))
}

/// Per-component loss nodes, any of which may be absent.
#[derive(Clone, Copy, Debug, Default)]
pub struct Components {
    pub mpr: Option<NodeId>,
    pub vfc: Option<NodeId>,
    pub curv: Option<NodeId>,
}

/// `L_TD + lambda1 L_MPR + lambda2 L_VFC + lambda3 L_Curv`; absent or
/// zero-weighted components contribute nothing.
pub fn total_loss(g: &mut Graph, td: NodeId, parts: Components, hp: &PaveHyperParams) -> Result<NodeId> {
    let mut total = td;
    for (node, w) in [(parts.mpr, hp.lambda1), (parts.vfc, hp.lambda2), (parts.curv, hp.lambda3)] {
        if let Some(n) = node {
            if w != 0.0 {
                let scaled = g.scale(n, w);
                total = g.add(total, scaled)?;
            }
        }
    }
    Ok(total)
}

/// The three regularizers as an [`AuxiliaryLoss`], with dedicated random
/// streams for perturbations and probes. Zero-weighted terms are not built.
#[derive(Clone, Debug)]
pub struct PaveRegularizer {
    pub hp: PaveHyperParams,
    perturb_rng: ChaCha8Rng,
    probe_rng: ChaCha8Rng,
}

impl PaveRegularizer {
    pub fn new(hp: PaveHyperParams, perturb_seed: u64, probe_seed: u64) -> Result<Self> {
        hp.validate()?;
        Ok(Self {
            hp,
            perturb_rng: ChaCha8Rng::seed_from_u64(perturb_seed),
            probe_rng: ChaCha8Rng::seed_from_u64(probe_seed),
        })
    }

    /// Build every component regardless of weight.
    pub fn build_all(&mut self, g: &mut Graph, critic: &dyn CriticModel, batch: &BatchNodes) -> Result<Components> {
        Ok(Components {
            mpr: Some(self.build_mpr(g, critic, batch)?),
            vfc: Some(vfc_loss(g, critic, batch.s, batch.s_next, batch.a)?),
            curv: Some(self.build_curv(g, critic, batch)?),
        })
    }

    fn build_mpr(&mut self, g: &mut Graph, critic: &dyn CriticModel, batch: &BatchNodes) -> Result<NodeId> {
        mpr_loss(g, critic, batch.s, batch.a, self.hp.sigma, &mut self.perturb_rng)
    }

    fn build_curv(&mut self, g: &mut Graph, critic: &dyn CriticModel, batch: &BatchNodes) -> Result<NodeId> {
        let d = critic.action_dim();
        let probes = (0..self.hp.n_rademacher)
            .map(|_| sample_rademacher(d, batch.rows, &mut self.probe_rng))
            .collect::<Result<Vec<_>>>()?;
        curv_loss(g, critic, batch.s, batch.a, self.hp.delta, &probes, self.hp.hvp_eps)
    }
}

impl AuxiliaryLoss for PaveRegularizer {
    fn build(&mut self, g: &mut Graph, critic: &dyn CriticModel, batch: &BatchNodes) -> Result<Vec<LossTerm>> {
        let mut terms = Vec::new();
        if self.hp.lambda1 != 0.0 {
            terms.push(LossTerm {
                kind: AuxKind::MixedPartial,
                weight: self.hp.lambda1,
                node: self.build_mpr(g, critic, batch)?,
            });
        }
        if self.hp.lambda2 != 0.0 {
            terms.push(LossTerm {
                kind: AuxKind::VectorField,
                weight: self.hp.lambda2,
                node: vfc_loss(g, critic, batch.s, batch.s_next, batch.a)?,
            });
        }
        if self.hp.lambda3 != 0.0 {
            terms.push(LossTerm {
                kind: AuxKind::Curvature,
                weight: self.hp.lambda3,
                node: self.build_curv(g, critic, batch)?,
            });
        }
        Ok(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::QuadraticCritic;
    use ndarray::array;

    fn nodes(g: &mut Graph, s: Matrix, a: Matrix, s_next: Matrix) -> BatchNodes {
        let rows = s.nrows();
        BatchNodes {
            s: g.leaf(s),
            a: g.leaf(a),
            s_next: g.leaf(s_next),
            rows,
        }
    }

    fn state_free(d: usize) -> QuadraticCritic {
        let mut q = QuadraticCritic::bilinear(Array2::zeros((2, d)));
        q.c_aa = -Array2::eye(d);
        q.g_a = ndarray::Array1::ones(d);
        q
    }

    #[test]
    fn zero_sigma_and_state_free_critic_give_zero_mpr() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = QuadraticCritic::bilinear(array![[1.0, -2.0], [0.5, 3.0]]);
        let mut g = Graph::new();
        let n = nodes(&mut g, array![[0.1, 0.2], [1.0, -1.0]], array![[0.0, 1.0], [0.5, 0.5]], array![[0.0, 0.0], [0.0, 0.0]]);
        let l = mpr_loss(&mut g, &b, n.s, n.a, 0.0, &mut rng).unwrap();
        assert_eq!(g.scalar(l).unwrap(), 0.0);
        let free = state_free(2);
        let l = mpr_loss(&mut g, &free, n.s, n.a, 0.3, &mut rng).unwrap();
        assert_eq!(g.scalar(l).unwrap(), 0.0);
        let l = vfc_loss(&mut g, &free, n.s, n.s_next, n.a).unwrap();
        assert_eq!(g.scalar(l).unwrap(), 0.0);
        let l = vfc_loss(&mut g, &b, n.s, n.s, n.a).unwrap();
        assert_eq!(g.scalar(l).unwrap(), 0.0);
    }

    #[test]
    fn vfc_bilinear_closed_form() {
        let bm = array![[1.0, -2.0], [0.5, 3.0], [0.0, 1.5]];
        let q = QuadraticCritic::bilinear(bm.clone());
        let s = array![[0.3, -0.2, 0.9]];
        let sn = array![[0.1, 0.4, 1.0]];
        let mut g = Graph::new();
        let n = nodes(&mut g, s.clone(), array![[0.2, -0.7]], sn.clone());
        let l = vfc_loss(&mut g, &q, n.s, n.s_next, n.a).unwrap();
        let ds = &sn - &s;
        let bd = ds.dot(&bm);
        let exact: f64 = bd.iter().map(|x| x * x).sum();
        assert!((g.scalar(l).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn curvature_cases() {
        let s = array![[0.0, 0.0]];
        let a = array![[0.3, -0.1]];
        // strongly concave: every hinge inactive
        let mut q = QuadraticCritic::bilinear(Array2::zeros((2, 2)));
        q.c_aa = array![[-2.0, 0.0], [0.0, -2.0]];
        let mut g = Graph::new();
        let n = nodes(&mut g, s.clone(), a.clone(), s.clone());
        for v in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            let probe = RademacherBatch {
                vectors: array![[v[0], v[1]]],
            };
            let l = curv_loss(&mut g, &q, n.s, n.a, 1.0, &[probe], HVP_FD_EPS).unwrap();
            assert_eq!(g.scalar(l).unwrap(), 0.0);
        }
        // flat: loss equals delta
        let flat = QuadraticCritic::bilinear(Array2::zeros((2, 2)));
        let probe = RademacherBatch {
            vectors: array![[1.0, -1.0]],
        };
        let l = curv_loss(&mut g, &flat, n.s, n.a, 0.5, &[probe], HVP_FD_EPS).unwrap();
        assert_eq!(g.scalar(l).unwrap(), 0.5);
        // diag(-2, 1), delta = 0.5: enumerate all four probes by hand
        let mut q = QuadraticCritic::bilinear(Array2::zeros((2, 2)));
        q.c_aa = array![[-2.0, 0.0], [0.0, 1.0]];
        let probes: Vec<RademacherBatch> = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
            .iter()
            .map(|v| RademacherBatch {
                vectors: array![[v[0], v[1]]],
            })
            .collect();
        let l = curv_loss(&mut g, &q, n.s, n.a, 0.5, &probes, HVP_FD_EPS).unwrap();
        // v'Cv = -2 + 1 = -1 for every v, hinge(-1 + 0.5) = 0
        assert!(g.scalar(l).unwrap().abs() < 1e-9);
        let l = curv_loss(&mut g, &q, n.s, n.a, 1.5, &probes, HVP_FD_EPS).unwrap();
        assert!((g.scalar(l).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn total_loss_arithmetic() {
        let mut g = Graph::new();
        let td = g.scalar_leaf(1.0);
        let parts = Components {
            mpr: Some(g.scalar_leaf(2.0)),
            vfc: Some(g.scalar_leaf(3.0)),
            curv: Some(g.scalar_leaf(4.0)),
        };
        let base = total_loss(&mut g, td, parts, &PaveHyperParams::base()).unwrap();
        assert_eq!(base, td);
        let ones = PaveHyperParams {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            ..Default::default()
        };
        let t = total_loss(&mut g, td, parts, &ones).unwrap();
        assert_eq!(g.scalar(t).unwrap(), 10.0);
    }

    #[test]
    fn pendulum_preset() {
        let hp = PaveHyperParams::pendulum();
        assert_eq!((hp.lambda1, hp.lambda2, hp.lambda3), (2.0, 0.005, 2.0));
        hp.validate().unwrap();
        assert!(PaveHyperParams { delta: 0.0, ..hp.clone() }.validate().is_err());
        assert!(PaveHyperParams { n_rademacher: 0, ..hp }.validate().is_err());
    }

    #[test]
    fn rademacher_entries_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = sample_rademacher(4, 25_000, &mut rng).unwrap();
        assert!(r.vectors.iter().all(|&v| v == 1.0 || v == -1.0));
        let n = r.vectors.len() as f64;
        let mean = r.vectors.sum() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!(sample_rademacher(0, 3, &mut rng).is_err());
    }
}
