//! Eager, define-by-run computation graph over dense `f64` matrices.
//!
//! Every node stores its primal value at insertion time. The backward pass
//! ([`Graph::grad`]) does not produce plain numbers: it appends new nodes to
//! the same graph, so a gradient is itself differentiable. Taking the
//! gradient of a loss that was built from gradients (reverse-over-reverse)
//! is therefore just a second call to [`Graph::grad`].
//!
//! Shapes are always two-dimensional. Batched quantities use one row per
//! batch element.

use std::collections::HashMap;

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    /// `op(a) * op(b)` where `op` optionally transposes.
    MatMul {
        a: NodeId,
        b: NodeId,
        ta: bool,
        tb: bool,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Offset(NodeId, f64),
    Square(NodeId),
    Silu(NodeId),
    /// First derivative of SiLU, evaluated elementwise.
    SiluPrime(NodeId),
    /// Second derivative of SiLU. Its own derivative is never required.
    SiluSecond(NodeId),
    Relu(NodeId),
    /// Heaviside step, `1` where the input is positive. Has zero derivative.
    Step(NodeId),
    Tanh(NodeId),
    SumAll(NodeId),
    /// Column sums: `n x m -> 1 x m`.
    SumRows(NodeId),
    /// Row sums: `n x m -> n x 1`.
    SumCols(NodeId),
    /// Broadcast a `1 x 1`, `1 x m` or `n x 1` node to `rows x cols`.
    Broadcast {
        x: NodeId,
        rows: usize,
        cols: usize,
    },
}

impl Op {
    fn parents(&self) -> [Option<NodeId>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            MatMul { a, b, .. } | Add(a, b) | Sub(a, b) | Mul(a, b) => [Some(a), Some(b)],
            Scale(x, _) | Offset(x, _) | Square(x) | Silu(x) | SiluPrime(x) | SiluSecond(x)
            | Relu(x) | Step(x) | Tanh(x) | SumAll(x) | SumRows(x) | SumCols(x)
            | Broadcast { x, .. } => [Some(x), None],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Counters incremented by higher-level builders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    /// Batched action-gradient evaluations, i.e. evaluations per batch element.
    pub input_grad_evals: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    pub stats: GraphStats,
    /// Logistic of each node that feeds a SiLU-family op, shared by the
    /// value, first and second derivative.
    sigmoid: HashMap<usize, Matrix>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[inline]
pub fn silu_second(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
}

fn matmul(a: &Matrix, b: &Matrix, ta: bool, tb: bool) -> Matrix {
    match (ta, tb) {
        (false, false) => a.dot(b),
        (true, false) => a.t().dot(b),
        (false, true) => a.dot(&b.t()),
        (true, true) => a.t().dot(&b.t()),
    }
}

fn shape(m: &Matrix) -> (usize, usize) {
    (m.nrows(), m.ncols())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        shape(self.value(id))
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if shape(v) != (1, 1) {
            return Err(Error::NotScalar(shape(v)));
        }
        Ok(v[[0, 0]])
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn scalar_leaf(&mut self, x: f64) -> NodeId {
        self.leaf(Array2::from_elem((1, 1), x))
    }

    /// Replace the value of a leaf. Dependent values go stale until [`Graph::recompute`].
    pub fn set_leaf(&mut self, id: NodeId, value: Matrix) -> Result<()> {
        let node = &mut self.nodes[id.0];
        if !matches!(node.op, Op::Leaf) {
            return Err(Error::InvalidArgument(format!("node {} is not a leaf", id.0)));
        }
        if shape(&node.value) != shape(&value) {
            return Err(Error::Shape {
                op: "set_leaf",
                lhs: shape(&node.value),
                rhs: shape(&value),
            });
        }
        node.value = value;
        Ok(())
    }

    /// Re-evaluate every non-leaf node in insertion order.
    pub fn recompute(&mut self) {
        self.sigmoid.clear();
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            self.nodes[i].value = self.eval(&op);
        }
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn eval(&mut self, op: &Op) -> Matrix {
        use Op::*;
        if let Silu(x) | SiluPrime(x) | SiluSecond(x) = *op {
            let xv = &self.nodes[x.0].value;
            let sig = self.sigmoid.entry(x.0).or_insert_with(|| xv.mapv(sigmoid));
            let f: fn(f64, f64) -> f64 = match op {
                Silu(_) => |x, s| x * s,
                SiluPrime(_) => |x, s| s * (1.0 + x * (1.0 - s)),
                _ => |x, s| s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s)),
            };
            return Zip::from(xv).and(&*sig).map_collect(|&x, &s| f(x, s));
        }
        let v = |id: NodeId| &self.nodes[id.0].value;
        match *op {
            Leaf => unreachable!("leaves are not evaluated"),
            MatMul { a, b, ta, tb } => matmul(v(a), v(b), ta, tb),
            Add(a, b) => v(a) + v(b),
            Sub(a, b) => v(a) - v(b),
            Mul(a, b) => v(a) * v(b),
            Scale(x, c) => v(x) * c,
            Offset(x, c) => v(x) + c,
            Square(x) => v(x).mapv(|e| e * e),
            Silu(_) | SiluPrime(_) | SiluSecond(_) => unreachable!("handled above"),
            Relu(x) => v(x).mapv(|e| if e > 0.0 { e } else { 0.0 }),
            Step(x) => v(x).mapv(|e| if e > 0.0 { 1.0 } else { 0.0 }),
            Tanh(x) => v(x).mapv(f64::tanh),
            SumAll(x) => Array2::from_elem((1, 1), v(x).sum()),
            SumRows(x) => v(x).sum_axis(Axis(0)).insert_axis(Axis(0)),
            SumCols(x) => v(x).sum_axis(Axis(1)).insert_axis(Axis(1)),
            Broadcast { x, rows, cols } => v(x)
                .broadcast((rows, cols))
                .expect("broadcast shape checked at construction")
                .to_owned(),
        }
    }

    fn insert(&mut self, op: Op) -> NodeId {
        let value = self.eval(&op);
        self.push(op, value)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.matmul_t(a, b, false, false)
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId, ta: bool, tb: bool) -> Result<NodeId> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        let inner_a = if ta { ra } else { ca };
        let inner_b = if tb { cb } else { rb };
        if inner_a != inner_b {
            return Err(Error::Shape {
                op: "matmul",
                lhs: (ra, ca),
                rhs: (rb, cb),
            });
        }
        Ok(self.insert(Op::MatMul { a, b, ta, tb }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        Ok(self.insert(Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        Ok(self.insert(Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        Ok(self.insert(Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.insert(Op::Scale(x, c))
    }

    pub fn offset(&mut self, x: NodeId, c: f64) -> NodeId {
        self.insert(Op::Offset(x, c))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::Square(x))
    }

    pub fn silu(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::Silu(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::Relu(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::Tanh(x))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::SumAll(x))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        let s = self.sum(x);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::SumRows(x))
    }

    pub fn sum_cols(&mut self, x: NodeId) -> NodeId {
        self.insert(Op::SumCols(x))
    }

    pub fn broadcast(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        if (r != 1 && r != rows) || (c != 1 && c != cols) {
            return Err(Error::Shape {
                op: "broadcast",
                lhs: (r, c),
                rhs: (rows, cols),
            });
        }
        if (r, c) == (rows, cols) {
            return Ok(x);
        }
        Ok(self.insert(Op::Broadcast { x, rows, cols }))
    }

    /// `x + row`, with a `1 x m` row broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        let (r, c) = self.shape(x);
        let b = self.broadcast(row, r, c)?;
        self.add(x, b)
    }

    /// Gradients of the scalar `output` with respect to each node in `wrt`.
    ///
    /// The returned gradient nodes live on this graph and can be
    /// differentiated again. Nodes in `wrt` that `output` does not depend on
    /// get an all-zero leaf.
    pub fn grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        let out_shape = self.shape(output);
        if out_shape != (1, 1) {
            return Err(Error::NotScalar(out_shape));
        }
        let end = output.0 + 1;

        // Only nodes downstream of some target can carry a useful adjoint.
        let mut relevant = vec![false; end];
        for t in wrt {
            if t.0 < end {
                relevant[t.0] = true;
            }
        }
        for i in 0..end {
            if relevant[i] {
                continue;
            }
            relevant[i] = self.nodes[i]
                .op
                .parents()
                .iter()
                .flatten()
                .any(|p| relevant[p.0]);
        }

        let mut adjoint: Vec<Option<NodeId>> = vec![None; end];
        if relevant[output.0] {
            adjoint[output.0] = Some(self.scalar_leaf(1.0));
        }

        for i in (0..end).rev() {
            let Some(g) = adjoint[i] else { continue };
            if !relevant[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            for (parent, contrib) in self.backward_rule(NodeId(i), &op, g)? {
                if !relevant[parent.0] {
                    continue;
                }
                adjoint[parent.0] = Some(match adjoint[parent.0] {
                    None => contrib,
                    Some(prev) => self.insert(Op::Add(prev, contrib)),
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|t| match adjoint.get(t.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let zeros = Array2::zeros(self.shape(*t));
                    self.leaf(zeros)
                }
            })
            .collect())
    }

    /// Local vector-Jacobian products of node `id` given its adjoint `g`.
    fn backward_rule(&mut self, id: NodeId, op: &Op, g: NodeId) -> Result<Vec<(NodeId, NodeId)>> {
        use Op::*;
        Ok(match *op {
            Leaf | Step(_) => vec![],
            MatMul { a, b, ta, tb } => {
                let ga = if ta {
                    self.insert(MatMul { a: b, b: g, ta: tb, tb: true })
                } else {
                    self.insert(MatMul { a: g, b, ta: false, tb: !tb })
                };
                let gb = if tb {
                    self.insert(MatMul { a: g, b: a, ta: true, tb: ta })
                } else {
                    self.insert(MatMul { a, b: g, ta: !ta, tb: false })
                };
                vec![(a, ga), (b, gb)]
            }
            Add(a, b) => vec![(a, g), (b, g)],
            Sub(a, b) => {
                let nb = self.insert(Scale(g, -1.0));
                vec![(a, g), (b, nb)]
            }
            Mul(a, b) => {
                let ga = self.insert(Mul(g, b));
                let gb = self.insert(Mul(g, a));
                vec![(a, ga), (b, gb)]
            }
            Scale(x, c) => vec![(x, self.insert(Scale(g, c)))],
            Offset(x, _) => vec![(x, g)],
            Square(x) => {
                let two_x = self.insert(Scale(x, 2.0));
                vec![(x, self.insert(Mul(g, two_x)))]
            }
            Silu(x) => {
                let d = self.insert(SiluPrime(x));
                vec![(x, self.insert(Mul(g, d)))]
            }
            SiluPrime(x) => {
                let d = self.insert(SiluSecond(x));
                vec![(x, self.insert(Mul(g, d)))]
            }
            SiluSecond(_) => return Err(Error::ThirdOrder),
            Relu(x) => {
                let mask = self.insert(Step(x));
                vec![(x, self.insert(Mul(g, mask)))]
            }
            Tanh(_) => {
                let x = op.parents()[0].expect("tanh has a parent");
                let tt = self.insert(Square(id));
                let neg = self.insert(Scale(tt, -1.0));
                let d = self.insert(Offset(neg, 1.0));
                vec![(x, self.insert(Mul(g, d)))]
            }
            SumAll(x) => {
                let (rows, cols) = self.shape(x);
                vec![(x, self.insert(Broadcast { x: g, rows, cols }))]
            }
            SumRows(x) | SumCols(x) => {
                let (rows, cols) = self.shape(x);
                vec![(x, self.insert(Broadcast { x: g, rows, cols }))]
            }
            Broadcast { x, rows, cols } => {
                let (r, c) = self.shape(x);
                let mut acc = g;
                if r == 1 && rows != 1 {
                    acc = self.insert(SumRows(acc));
                }
                if c == 1 && cols != 1 {
                    acc = self.insert(SumCols(acc));
                }
                vec![(x, acc)]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn silu_values() {
        assert_eq!(silu(0.0), 0.0);
        assert_eq!(silu_prime(0.0), 0.5);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((silu(1.0) - expected).abs() < 1e-15);
        // second derivative by central difference of the first
        let h = 1e-5;
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let fd = (silu_prime(x + h) - silu_prime(x - h)) / (2.0 * h);
            assert!((fd - silu_second(x)).abs() < 1e-8, "x={x}");
            let fd1 = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((fd1 - silu_prime(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn matmul_gradients_all_transposes() {
        let av = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.25]];
        let bv = array![[2.0, -1.0, 0.5], [1.5, 0.0, 3.0]];
        for &(ta, tb) in &[(false, false), (true, false), (false, true), (true, true)] {
            let mut g = Graph::new();
            let a = if ta { g.leaf(av.t().to_owned()) } else { g.leaf(av.clone()) };
            let b = if tb { g.leaf(bv.t().to_owned()) } else { g.leaf(bv.clone()) };
            let c = g.matmul_t(a, b, ta, tb).unwrap();
            let sq = g.square(c);
            let loss = g.sum(sq);
            let grads = g.grad(loss, &[a, b]).unwrap();
            // dL/dA = 2 C B^T, dL/dB = 2 A^T C in the untransposed frame
            let cv = av.dot(&bv);
            let mut da = (&cv * 2.0).dot(&bv.t());
            let mut db = av.t().dot(&(&cv * 2.0));
            if ta {
                da = da.t().to_owned();
            }
            if tb {
                db = db.t().to_owned();
            }
            assert_eq!(g.value(grads[0]), &da);
            assert_eq!(g.value(grads[1]), &db);
        }
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Array2::zeros((2, 1)));
        assert!(matches!(g.grad(x, &[x]), Err(Error::NotScalar((2, 1)))));
    }

    #[test]
    fn unreachable_target_gets_zero() {
        let mut g = Graph::new();
        let x = g.leaf(array![[1.0, 2.0]]);
        let y = g.leaf(array![[3.0]]);
        let s = g.sum(x);
        let grads = g.grad(s, &[y]).unwrap();
        assert_eq!(g.value(grads[0]), &array![[0.0]]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(array![[1.0, 2.0]]);
        let c = g.scalar_leaf(4.0);
        let grads = g.grad(c, &[x]).unwrap();
        assert_eq!(g.value(grads[0]), &array![[0.0, 0.0]]);
    }

    #[test]
    fn third_order_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(array![[0.3]]);
        let y = g.silu(x);
        let s = g.sum(y);
        let d1 = g.grad(s, &[x]).unwrap()[0];
        let s1 = g.sum(d1);
        let d2 = g.grad(s1, &[x]).unwrap()[0];
        assert!((g.scalar(d2).unwrap() - silu_second(0.3)).abs() < 1e-15);
        let s2 = g.sum(d2);
        assert!(matches!(g.grad(s2, &[x]), Err(Error::ThirdOrder)));
    }

    #[test]
    fn recompute_is_bit_identical() {
        let mut g = Graph::new();
        let x = g.leaf(array![[0.1, -0.2], [0.3, 0.7]]);
        let w = g.leaf(array![[1.0, 2.0], [-0.5, 0.25]]);
        let z = g.matmul(x, w).unwrap();
        let h = g.silu(z);
        let t = g.tanh(h);
        let l = g.sum(t);
        let grads = g.grad(l, &[w]).unwrap();
        let before: Vec<Matrix> = (0..g.len()).map(|i| g.value(NodeId(i)).clone()).collect();
        g.recompute();
        for (i, v) in before.iter().enumerate() {
            assert_eq!(v, g.value(NodeId(i)));
        }
        g.set_leaf(x, array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        g.recompute();
        assert_eq!(g.value(grads[0]).shape(), &[2, 2]);
    }

    #[test]
    fn broadcast_reduces_back() {
        let mut g = Graph::new();
        let row = g.leaf(array![[1.0, 2.0, 3.0]]);
        let b = g.broadcast(row, 4, 3).unwrap();
        let s = g.sum(b);
        let gr = g.grad(s, &[row]).unwrap()[0];
        assert_eq!(g.value(gr), &array![[4.0, 4.0, 4.0]]);
        let col = g.leaf(array![[1.0], [2.0]]);
        let bc = g.broadcast(col, 2, 5).unwrap();
        let s = g.sum(bc);
        let gc = g.grad(s, &[col]).unwrap()[0];
        assert_eq!(g.value(gc), &array![[5.0], [5.0]]);
    }
}
