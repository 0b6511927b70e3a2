use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{silu, Graph, Matrix, NodeId};
use super::params::{LayerShape, ParamVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Silu,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => silu(x),
            Activation::Relu => x.max(0.0),
        }
    }

    fn node(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Silu => g.silu(x),
            Activation::Relu => g.relu(x),
        }
    }
}

/// Map applied after the last linear layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputMap {
    Linear,
    /// `bound * tanh(z)`, keeping every output inside `[-bound, bound]`.
    TanhScaled(f64),
}

/// Dense feed-forward network over flat parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    params: ParamVector,
    activation: Activation,
    output: OutputMap,
}

/// Graph leaves for the parameters of an [`Mlp`].
///
/// The first layer's weight is split by rows into one leaf per input block,
/// so callers can feed separate input nodes (state and action) without a
/// concatenation op.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    first: Vec<NodeId>,
    blocks: Vec<usize>,
    weights: Vec<NodeId>,
    biases: Vec<NodeId>,
}

impl Mlp {
    /// Uniform fan-in initialization: every weight and bias of a layer drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        output: OutputMap,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "network sizes must be >= 2 positive entries, got {sizes:?}"
            )));
        }
        let layout: Vec<LayerShape> = sizes
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect();
        let mut params = ParamVector::zeros(layout.clone());
        let mut off = 0;
        for shape in &layout {
            let bound = 1.0 / (shape.inputs as f64).sqrt();
            for v in &mut params.values_mut()[off..off + shape.len()] {
                *v = rng.random_range(-bound..bound);
            }
            off += shape.len();
        }
        Ok(Self {
            params,
            activation,
            output,
        })
    }

    pub fn from_params(params: ParamVector, activation: Activation, output: OutputMap) -> Result<Self> {
        let layout = params.layout();
        if layout.is_empty() || layout.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(Error::Layout(format!("layers do not chain: {layout:?}")));
        }
        Ok(Self {
            params,
            activation,
            output,
        })
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_map(&self) -> OutputMap {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.params.layout()[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.params.layout().last().expect("nonempty layout").outputs
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let layout = self.params.layout();
        std::iter::once(layout[0].inputs)
            .chain(layout.iter().map(|l| l.outputs))
            .collect()
    }

    /// Batched forward pass outside any graph, one row per sample.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Matrix {
        let n_layers = self.params.layout().len();
        let mut h = x.to_owned();
        for l in 0..n_layers {
            let mut z = h.dot(&self.params.weight(l));
            z += &self.params.bias(l).insert_axis(Axis(0));
            if l + 1 < n_layers {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            h = z;
        }
        if let OutputMap::TanhScaled(bound) = self.output {
            h.mapv_inplace(|v| bound * v.tanh());
        }
        h
    }

    /// Register parameters as graph leaves. `blocks` partitions the input
    /// width; it must sum to [`Mlp::input_dim`].
    pub fn bind(&self, g: &mut Graph, blocks: &[usize]) -> Result<BoundMlp> {
        let total: usize = blocks.iter().sum();
        if total != self.input_dim() {
            return Err(Error::Dimension {
                what: "network input blocks",
                expected: self.input_dim(),
                got: total,
            });
        }
        let w0 = self.params.weight(0);
        let mut first = Vec::with_capacity(blocks.len());
        let mut row = 0;
        for &b in blocks {
            first.push(g.leaf(w0.slice(ndarray::s![row..row + b, ..]).to_owned()));
            row += b;
        }
        let n_layers = self.params.layout().len();
        let mut weights = Vec::with_capacity(n_layers - 1);
        for l in 1..n_layers {
            weights.push(g.leaf(self.params.weight(l).to_owned()));
        }
        let biases = (0..n_layers)
            .map(|l| g.leaf(self.params.bias(l).to_owned().insert_axis(Axis(0))))
            .collect();
        Ok(BoundMlp {
            first,
            blocks: blocks.to_vec(),
            weights,
            biases,
        })
    }

    /// Forward pass on the graph. `inputs` follow the block split given to
    /// [`Mlp::bind`] and must share a row count.
    pub fn forward_node(&self, g: &mut Graph, bound: &BoundMlp, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() != bound.blocks.len() {
            return Err(Error::Dimension {
                what: "network input blocks",
                expected: bound.blocks.len(),
                got: inputs.len(),
            });
        }
        let rows = g.shape(inputs[0]).0;
        let mut z: Option<NodeId> = None;
        for ((&x, &w), &width) in inputs.iter().zip(&bound.first).zip(&bound.blocks) {
            let (r, c) = g.shape(x);
            if c != width {
                return Err(Error::Dimension {
                    what: "network input",
                    expected: width,
                    got: c,
                });
            }
            if r != rows {
                return Err(Error::Dimension {
                    what: "batch rows",
                    expected: rows,
                    got: r,
                });
            }
            let term = g.matmul(x, w)?;
            z = Some(match z {
                None => term,
                Some(acc) => g.add(acc, term)?,
            });
        }
        let mut h = g.add_row(z.expect("at least one block"), bound.biases[0])?;
        for (l, &w) in bound.weights.iter().enumerate() {
            h = self.activation.node(g, h);
            let z = g.matmul(h, w)?;
            h = g.add_row(z, bound.biases[l + 1])?;
        }
        if let OutputMap::TanhScaled(b) = self.output {
            let t = g.tanh(h);
            h = g.scale(t, b);
        }
        Ok(h)
    }

    /// Exact reverse-mode gradient of a scalar `loss` with respect to the
    /// parameters bound in `bound`, flattened in this network's layout.
    pub fn param_gradient(&self, g: &mut Graph, loss: NodeId, bound: &BoundMlp) -> Result<ParamVector> {
        let mut wrt = bound.first.clone();
        wrt.extend(&bound.weights);
        wrt.extend(&bound.biases);
        let grads = g.grad(loss, &wrt)?;
        let nb = bound.first.len();
        let nw = bound.weights.len();
        let mut out = ParamVector::zeros(self.params.layout().to_vec());
        let mut row = 0;
        for (i, &width) in bound.blocks.iter().enumerate() {
            out.weight_mut(0)
                .slice_mut(ndarray::s![row..row + width, ..])
                .assign(g.value(grads[i]));
            row += width;
        }
        for l in 0..nw {
            out.weight_mut(l + 1).assign(g.value(grads[nb + l]));
        }
        for l in 0..=nw {
            let b = g.value(grads[nb + nw + l]);
            out.bias_mut(l).copy_from_slice(b.as_slice().expect("contiguous bias"));
        }
        Ok(out)
    }
}

/// A critic that can be expressed on a computation graph, one row per sample.
pub trait CriticModel {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// `Q(s, a)` as an `n x 1` node.
    fn q_node(&self, g: &mut Graph, s: NodeId, a: NodeId) -> Result<NodeId>;
}

impl<T: CriticModel + ?Sized> CriticModel for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }

    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }

    fn q_node(&self, g: &mut Graph, s: NodeId, a: NodeId) -> Result<NodeId> {
        (**self).q_node(g, s, a)
    }
}

/// Anything that can place a [`CriticModel`] on a graph.
pub trait BindCritic {
    fn bind_model<'a>(&'a self, g: &mut Graph) -> Result<Box<dyn CriticModel + 'a>>;
}

pub(crate) fn check_batch(g: &Graph, k: usize, d: usize, s: NodeId, a: NodeId) -> Result<usize> {
    let (rs, cs) = g.shape(s);
    let (ra, ca) = g.shape(a);
    if cs != k {
        return Err(Error::Dimension {
            what: "state",
            expected: k,
            got: cs,
        });
    }
    if ca != d {
        return Err(Error::Dimension {
            what: "action",
            expected: d,
            got: ca,
        });
    }
    if rs != ra {
        return Err(Error::Dimension {
            what: "batch rows",
            expected: rs,
            got: ra,
        });
    }
    Ok(rs)
}

/// `grad_a Q(s, a)` per row as an `n x d` node that stays differentiable
/// with respect to everything `Q` depends on.
pub fn action_gradient(g: &mut Graph, critic: &dyn CriticModel, s: NodeId, a: NodeId) -> Result<NodeId> {
    let q = critic.q_node(g, s, a)?;
    let total = g.sum(q);
    let grad = g.grad(total, &[a])?[0];
    g.stats.input_grad_evals += 1;
    Ok(grad)
}

/// Step used by [`hvp_action`] for the central difference of action-gradients.
pub const HVP_FD_EPS: f64 = 1e-3;

/// Action-Hessian-vector product `(grad_aa Q) v` per row, as the central
/// difference of two exact action-gradients along `v`.
pub fn hvp_action(
    g: &mut Graph,
    critic: &dyn CriticModel,
    s: NodeId,
    a: NodeId,
    v: NodeId,
    eps: f64,
) -> Result<NodeId> {
    if g.shape(v) != g.shape(a) {
        return Err(Error::Shape {
            op: "hvp_action",
            lhs: g.shape(a),
            rhs: g.shape(v),
        });
    }
    if g.value(v).iter().all(|&x| x == 0.0) {
        return Ok(g.leaf(Array2::zeros(g.shape(a))));
    }
    let step = g.scale(v, eps);
    let a_plus = g.add(a, step)?;
    let a_minus = g.sub(a, step)?;
    let g_plus = action_gradient(g, critic, s, a_plus)?;
    let g_minus = action_gradient(g, critic, s, a_minus)?;
    let diff = g.sub(g_plus, g_minus)?;
    Ok(g.scale(diff, 0.5 / eps))
}

/// Twice-differentiable action-value network `Q(s, a)` with SiLU hidden units.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticNetwork {
    mlp: Mlp,
    state_dim: usize,
    action_dim: usize,
}

/// A [`CriticNetwork`] whose parameters are leaves on a particular graph.
#[derive(Clone, Debug)]
pub struct BoundCritic<'a> {
    pub net: &'a CriticNetwork,
    pub params: BoundMlp,
}

impl CriticNetwork {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Self {
            mlp: Mlp::new(&sizes, Activation::Silu, OutputMap::Linear, rng)?,
            state_dim,
            action_dim,
        })
    }

    pub fn from_params(state_dim: usize, action_dim: usize, params: ParamVector) -> Result<Self> {
        let mlp = Mlp::from_params(params, Activation::Silu, OutputMap::Linear)?;
        if mlp.input_dim() != state_dim + action_dim || mlp.output_dim() != 1 {
            return Err(Error::Layout(format!(
                "critic layout {:?} incompatible with k={state_dim}, d={action_dim}",
                mlp.sizes()
            )));
        }
        Ok(Self {
            mlp,
            state_dim,
            action_dim,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn params(&self) -> &ParamVector {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        self.mlp.params_mut()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        let s = self.mlp.sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundCritic<'_>> {
        Ok(BoundCritic {
            net: self,
            params: self.mlp.bind(g, &[self.state_dim, self.action_dim])?,
        })
    }

    fn check_point(&self, s: &[f64], a: &[f64]) -> Result<()> {
        if s.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim,
                got: s.len(),
            });
        }
        if a.len() != self.action_dim {
            return Err(Error::Dimension {
                what: "action",
                expected: self.action_dim,
                got: a.len(),
            });
        }
        Ok(())
    }

    /// `Q(s, a)` for a single state-action pair.
    pub fn forward(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        self.check_point(s, a)?;
        let x: Vec<f64> = s.iter().chain(a).copied().collect();
        let x = ArrayView2::from_shape((1, x.len()), &x).expect("row vector");
        Ok(self.mlp.forward_batch(x)[[0, 0]])
    }

    /// `Q` for every row of `(s, a)`, as a column.
    pub fn forward_batch(&self, s: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>) -> Result<Matrix> {
        if s.ncols() != self.state_dim || a.ncols() != self.action_dim || s.nrows() != a.nrows() {
            return Err(Error::Shape {
                op: "critic_forward",
                lhs: s.dim(),
                rhs: a.dim(),
            });
        }
        let x = ndarray::concatenate(Axis(1), &[s, a]).expect("rows checked");
        Ok(self.mlp.forward_batch(x.view()))
    }

    /// `grad_a Q(s, a)` for a single pair, evaluated on a scratch graph.
    pub fn action_gradient(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.check_point(s, a)?;
        let mut g = Graph::new();
        let bound = self.bind(&mut g)?;
        let sn = g.leaf(Array2::from_shape_vec((1, s.len()), s.to_vec()).expect("row"));
        let an = g.leaf(Array2::from_shape_vec((1, a.len()), a.to_vec()).expect("row"));
        let grad = action_gradient(&mut g, &bound, sn, an)?;
        Ok(g.value(grad).iter().copied().collect())
    }
}

impl CriticModel for BoundCritic<'_> {
    fn state_dim(&self) -> usize {
        self.net.state_dim
    }

    fn action_dim(&self) -> usize {
        self.net.action_dim
    }

    fn q_node(&self, g: &mut Graph, s: NodeId, a: NodeId) -> Result<NodeId> {
        check_batch(g, self.net.state_dim, self.net.action_dim, s, a)?;
        self.net.mlp.forward_node(g, &self.params, &[s, a])
    }
}

impl BindCritic for CriticNetwork {
    fn bind_model<'a>(&'a self, g: &mut Graph) -> Result<Box<dyn CriticModel + 'a>> {
        Ok(Box::new(self.bind(g)?))
    }
}

impl BoundCritic<'_> {
    pub fn param_gradient(&self, g: &mut Graph, loss: NodeId) -> Result<ParamVector> {
        self.net.mlp.param_gradient(g, loss, &self.params)
    }
}

/// Deterministic policy `pi(s)` with ReLU hidden units and a tanh-squashed
/// output scaled to the symmetric action box `[-max_action, max_action]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorNetwork {
    mlp: Mlp,
    state_dim: usize,
    action_dim: usize,
    max_action: f64,
}

#[derive(Clone, Debug)]
pub struct BoundActor<'a> {
    pub net: &'a ActorNetwork,
    pub params: BoundMlp,
}

impl ActorNetwork {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        max_action: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(max_action > 0.0 && max_action.is_finite()) {
            return Err(Error::InvalidArgument(format!("max_action must be positive, got {max_action}")));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Ok(Self {
            mlp: Mlp::new(&sizes, Activation::Relu, OutputMap::TanhScaled(max_action), rng)?,
            state_dim,
            action_dim,
            max_action,
        })
    }

    pub fn from_params(state_dim: usize, action_dim: usize, max_action: f64, params: ParamVector) -> Result<Self> {
        let mlp = Mlp::from_params(params, Activation::Relu, OutputMap::TanhScaled(max_action))?;
        if mlp.input_dim() != state_dim || mlp.output_dim() != action_dim {
            return Err(Error::Layout(format!(
                "actor layout {:?} incompatible with k={state_dim}, d={action_dim}",
                mlp.sizes()
            )));
        }
        Ok(Self {
            mlp,
            state_dim,
            action_dim,
            max_action,
        })
    }

    pub fn params(&self) -> &ParamVector {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        self.mlp.params_mut()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn max_action(&self) -> f64 {
        self.max_action
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        let s = self.mlp.sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn act(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim,
                got: s.len(),
            });
        }
        let x = ArrayView2::from_shape((1, s.len()), s).expect("row vector");
        Ok(self.mlp.forward_batch(x).into_iter().collect())
    }

    pub fn act_batch(&self, s: ArrayView2<'_, f64>) -> Matrix {
        self.mlp.forward_batch(s)
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundActor<'_>> {
        Ok(BoundActor {
            net: self,
            params: self.mlp.bind(g, &[self.state_dim])?,
        })
    }
}

impl BoundActor<'_> {
    pub fn forward_node(&self, g: &mut Graph, s: NodeId) -> Result<NodeId> {
        self.net.mlp.forward_node(g, &self.params, &[s])
    }

    pub fn param_gradient(&self, g: &mut Graph, loss: NodeId) -> Result<ParamVector> {
        self.net.mlp.param_gradient(g, loss, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_critic_returns_final_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = CriticNetwork::new(2, 1, &[4], &mut rng).unwrap();
        for v in c.params_mut().values_mut() {
            *v = 0.0;
        }
        c.params_mut().bias_mut(1)[0] = 0.75;
        assert_eq!(c.forward(&[3.0, -1.0], &[0.5]).unwrap(), 0.75);
    }

    #[test]
    fn single_linear_layer_sums_inputs() {
        // sizes [2, 1]: no hidden activation, Q = w . (s, a) + b
        let p = ParamVector::from_parts(vec![LayerShape { inputs: 2, outputs: 1 }], vec![1.0, 1.0, 0.0]).unwrap();
        let c = CriticNetwork::from_params(1, 1, p).unwrap();
        assert_eq!(c.forward(&[2.0], &[3.0]).unwrap(), 5.0);
        assert_eq!(c.action_gradient(&[2.0], &[3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = CriticNetwork::new(3, 1, &[8], &mut rng).unwrap();
        assert!(matches!(c.forward(&[1.0, 2.0], &[0.0]), Err(Error::Dimension { .. })));
        assert!(matches!(c.action_gradient(&[1.0, 2.0, 3.0], &[0.0, 1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn forward_is_deterministic_and_graph_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = CriticNetwork::new(3, 2, &[16, 16], &mut rng).unwrap();
        let s = [0.1, -0.4, 0.9];
        let a = [0.3, -1.2];
        let q1 = c.forward(&s, &a).unwrap();
        let q2 = c.forward(&s, &a).unwrap();
        assert_eq!(q1.to_bits(), q2.to_bits());
        let mut g = Graph::new();
        let b = c.bind(&mut g).unwrap();
        let sn = g.leaf(array![[0.1, -0.4, 0.9]]);
        let an = g.leaf(array![[0.3, -1.2]]);
        let q = b.q_node(&mut g, sn, an).unwrap();
        assert!((g.scalar(q).unwrap() - q1).abs() < 1e-14);
    }

    #[test]
    fn actor_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut actor = ActorNetwork::new(3, 1, &[8], 2.0, &mut rng).unwrap();
        for v in actor.params_mut().values_mut() {
            *v *= 100.0;
        }
        for i in 0..50 {
            let x = i as f64 - 25.0;
            let a = actor.act(&[x, -x, 0.5 * x]).unwrap();
            assert!(a[0].abs() <= 2.0);
        }
    }

    #[test]
    fn hvp_zero_vector_and_linear_critic() {
        let p = ParamVector::from_parts(vec![LayerShape { inputs: 3, outputs: 1 }], vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        let c = CriticNetwork::from_params(1, 2, p).unwrap();
        let mut g = Graph::new();
        let b = c.bind(&mut g).unwrap();
        let s = g.leaf(array![[0.7]]);
        let a = g.leaf(array![[0.1, -0.2]]);
        let zero = g.leaf(array![[0.0, 0.0]]);
        let h0 = hvp_action(&mut g, &b, s, a, zero, HVP_FD_EPS).unwrap();
        assert_eq!(g.value(h0), &array![[0.0, 0.0]]);
        let v = g.leaf(array![[1.0, -1.0]]);
        let h = hvp_action(&mut g, &b, s, a, v, HVP_FD_EPS).unwrap();
        assert!(g.value(h).iter().all(|x| x.abs() < 1e-12));
    }
}
