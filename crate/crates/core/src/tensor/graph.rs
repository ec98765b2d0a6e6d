//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records primitive operations in construction order; since an
//! operation can only reference already-inserted nodes, the tape is
//! topologically sorted for free and backpropagation is a single reverse
//! sweep visiting each node exactly once. Every primitive registers an exact
//! vector-Jacobian product.
//!
//! Shape rules are enforced with panics that report both offending shapes;
//! the network architectures built on top are shape-static, so a mismatch is
//! a programming error rather than a runtime condition.

use crate::tensor::{AutogradError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Matrix plus row vector, broadcast down the rows.
    AddRow(NodeId, NodeId),
    /// Any tensor plus a scalar tensor, broadcast everywhere.
    AddScalar(NodeId, NodeId),
    Scale(NodeId, f64),
    ConcatRows(Vec<NodeId>),
    ConcatCols(NodeId, NodeId),
    GatherRows(NodeId, Vec<usize>),
    Reshape(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    /// Row-wise softmax of a matrix.
    SoftmaxRows(NodeId),
    Square(NodeId),
    /// Single element as a scalar.
    Pick(NodeId, usize),
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

/// The recording tape. Build values through the op methods, then call
/// [`Graph::backward`] on a scalar node.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn leaf(&mut self, tensor: &Tensor, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf, tensor.shape().to_vec(), tensor.data().to_vec(), requires_grad)
    }

    pub fn constant(&mut self, tensor: &Tensor) -> NodeId {
        self.leaf(tensor, false)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.push(Op::Leaf, vec![], vec![value], false)
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn value_tensor(&self, id: NodeId) -> Tensor {
        Tensor::new(self.nodes[id.0].shape.clone(), self.nodes[id.0].value.clone())
            .expect("node shape is consistent")
    }

    /// Gradient of the last backward pass with respect to `id`, if that node
    /// required gradients.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            grad: None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn dims2(&self, id: NodeId, ctx: &str) -> (usize, usize) {
        match self.nodes[id.0].shape.as_slice() {
            [r, c] => (*r, *c),
            other => panic!("{ctx}: expected a matrix, got shape {other:?}"),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.dims2(a, "matmul lhs");
        let (k2, n) = self.dims2(b, "matmul rhs");
        assert!(
            k == k2,
            "matmul shape mismatch: {:?} x {:?}",
            self.shape(a),
            self.shape(b)
        );
        let mut out = vec![0.0; m * n];
        {
            let av = &self.nodes[a.0].value;
            let bv = &self.nodes[b.0].value;
            for i in 0..m {
                for p in 0..k {
                    let aip = av[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &bv[p * n..(p + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for j in 0..n {
                        orow[j] += aip * brow[j];
                    }
                }
            }
        }
        let rg = self.requires(a) || self.requires(b);
        self.push(Op::Matmul(a, b), vec![m, n], out, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert!(
            self.shape(a) == self.shape(b),
            "add shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        let rg = self.requires(a) || self.requires(b);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::Add(a, b), shape, value, rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert!(
            self.shape(a) == self.shape(b),
            "sub shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x - y);
        let rg = self.requires(a) || self.requires(b);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::Sub(a, b), shape, value, rg)
    }

    /// `[m, n]` matrix plus length-`n` bias vector.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (m, n) = self.dims2(a, "add_row lhs");
        assert!(
            self.shape(bias) == [n],
            "add_row shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(bias)
        );
        let mut value = self.nodes[a.0].value.clone();
        let bv = &self.nodes[bias.0].value;
        for i in 0..m {
            for j in 0..n {
                value[i * n + j] += bv[j];
            }
        }
        let rg = self.requires(a) || self.requires(bias);
        self.push(Op::AddRow(a, bias), vec![m, n], value, rg)
    }

    /// Tensor plus scalar tensor, broadcast to every element.
    pub fn add_scalar(&mut self, a: NodeId, scalar: NodeId) -> NodeId {
        assert!(
            self.nodes[scalar.0].value.len() == 1,
            "add_scalar shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(scalar)
        );
        let s = self.nodes[scalar.0].value[0];
        let value = self.nodes[a.0].value.iter().map(|x| x + s).collect();
        let rg = self.requires(a) || self.requires(scalar);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::AddScalar(a, scalar), shape, value, rg)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.nodes[a.0].value.iter().map(|x| x * factor).collect();
        let rg = self.requires(a);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::Scale(a, factor), shape, value, rg)
    }

    /// Stack matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_rows needs at least one part");
        let (_, n) = self.dims2(parts[0], "concat_rows");
        let mut rows = 0;
        let mut value = Vec::new();
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows");
            assert!(
                c == n,
                "concat_rows shape mismatch: {:?} vs {:?}",
                self.shape(parts[0]),
                self.shape(p)
            );
            rows += r;
            value.extend_from_slice(&self.nodes[p.0].value);
        }
        let rg = parts.iter().any(|&p| self.requires(p));
        self.push(Op::ConcatRows(parts.to_vec()), vec![rows, n], value, rg)
    }

    /// Concatenate two matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, p) = self.dims2(a, "concat_cols lhs");
        let (m2, q) = self.dims2(b, "concat_cols rhs");
        assert!(
            m == m2,
            "concat_cols shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let mut value = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            value.extend_from_slice(&self.nodes[a.0].value[i * p..(i + 1) * p]);
            value.extend_from_slice(&self.nodes[b.0].value[i * q..(i + 1) * q]);
        }
        let rg = self.requires(a) || self.requires(b);
        self.push(Op::ConcatCols(a, b), vec![m, p + q], value, rg)
    }

    /// Select rows of a matrix by index, with repetition allowed.
    pub fn gather_rows(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        let (m, n) = self.dims2(a, "gather_rows");
        let mut value = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            assert!(i < m, "gather_rows index {i} out of range for shape {:?}", self.shape(a));
            value.extend_from_slice(&self.nodes[a.0].value[i * n..(i + 1) * n]);
        }
        let rg = self.requires(a);
        self.push(
            Op::GatherRows(a, indices.to_vec()),
            vec![indices.len(), n],
            value,
            rg,
        )
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let expected: usize = shape.iter().product();
        assert!(
            expected == self.nodes[a.0].value.len(),
            "reshape shape mismatch: {:?} vs {:?}",
            self.shape(a),
            shape
        );
        let value = self.nodes[a.0].value.clone();
        let rg = self.requires(a);
        self.push(Op::Reshape(a), shape, value, rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = vec![self.nodes[a.0].value.iter().sum()];
        let rg = self.requires(a);
        self.push(Op::Sum(a), vec![], value, rg)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let len = self.nodes[a.0].value.len().max(1);
        let value = vec![self.nodes[a.0].value.iter().sum::<f64>() / len as f64];
        let rg = self.requires(a);
        self.push(Op::Mean(a), vec![], value, rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.iter().map(|&x| x.max(0.0)).collect();
        let rg = self.requires(a);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::Relu(a), shape, value, rg)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let value = self.nodes[a.0]
            .value
            .iter()
            .map(|&x| if x >= 0.0 { x } else { slope * x })
            .collect();
        let rg = self.requires(a);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::LeakyRelu(a, slope), shape, value, rg)
    }

    /// Numerically stable row-wise softmax of a matrix.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims2(a, "softmax_rows");
        let mut value = self.nodes[a.0].value.clone();
        for i in 0..m {
            let row = &mut value[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let rg = self.requires(a);
        self.push(Op::SoftmaxRows(a), vec![m, n], value, rg)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.iter().map(|x| x * x).collect();
        let rg = self.requires(a);
        let shape = self.nodes[a.0].shape.clone();
        self.push(Op::Square(a), shape, value, rg)
    }

    /// Extract one element as a scalar node.
    pub fn pick(&mut self, a: NodeId, index: usize) -> NodeId {
        assert!(
            index < self.nodes[a.0].value.len(),
            "pick index {index} out of range for shape {:?}",
            self.shape(a)
        );
        let value = vec![self.nodes[a.0].value[index]];
        let rg = self.requires(a);
        self.push(Op::Pick(a, index), vec![], value, rg)
    }

    /// Backpropagate from a scalar loss, filling gradients for every node
    /// that requires them. A second call without rebuilding the graph would
    /// silently accumulate, so it is rejected.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), AutogradError> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(AutogradError::NonScalarLoss {
                shape: self.nodes[loss.0].shape.clone(),
            });
        }
        if self.backward_done {
            return Err(AutogradError::RepeatedBackward);
        }
        self.backward_done = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let go = match self.nodes[idx].grad.take() {
                Some(g) => g,
                None => continue,
            };
            self.apply_vjp(idx, &go);
            self.nodes[idx].grad = Some(go);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, update: impl FnOnce(&mut [f64])) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        if self.nodes[id.0].grad.is_none() {
            self.nodes[id.0].grad = Some(vec![0.0; self.nodes[id.0].value.len()]);
        }
        update(self.nodes[id.0].grad.as_mut().expect("just initialized"));
    }

    fn apply_vjp(&mut self, idx: usize, go: &[f64]) {
        // Ops are matched by value to appease the borrow checker; the
        // operand lists are tiny.
        match &self.nodes[idx].op {
            Op::Leaf => {}
            &Op::Matmul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                if self.requires(a) {
                    let bv = self.nodes[b.0].value.clone();
                    self.accumulate(a, |ga| {
                        for i in 0..m {
                            for p in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += go[i * n + j] * bv[p * n + j];
                                }
                                ga[i * k + p] += acc;
                            }
                        }
                    });
                }
                if self.requires(b) {
                    let av = self.nodes[a.0].value.clone();
                    self.accumulate(b, |gb| {
                        for p in 0..k {
                            for i in 0..m {
                                let aip = av[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                for j in 0..n {
                                    gb[p * n + j] += aip * go[i * n + j];
                                }
                            }
                        }
                    });
                }
            }
            &Op::Add(a, b) => {
                self.accumulate(a, |g| add_assign(g, go));
                self.accumulate(b, |g| add_assign(g, go));
            }
            &Op::Sub(a, b) => {
                self.accumulate(a, |g| add_assign(g, go));
                self.accumulate(b, |g| {
                    for (gi, &x) in g.iter_mut().zip(go) {
                        *gi -= x;
                    }
                });
            }
            &Op::AddRow(a, bias) => {
                let n = self.nodes[bias.0].value.len();
                self.accumulate(a, |g| add_assign(g, go));
                self.accumulate(bias, |g| {
                    for (i, &x) in go.iter().enumerate() {
                        g[i % n] += x;
                    }
                });
            }
            &Op::AddScalar(a, scalar) => {
                self.accumulate(a, |g| add_assign(g, go));
                self.accumulate(scalar, |g| g[0] += go.iter().sum::<f64>());
            }
            &Op::Scale(a, factor) => {
                self.accumulate(a, |g| {
                    for (gi, &x) in g.iter_mut().zip(go) {
                        *gi += factor * x;
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    let slice = &go[offset..offset + len];
                    self.accumulate(p, |g| add_assign(g, slice));
                    offset += len;
                }
            }
            &Op::ConcatCols(a, b) => {
                let (m, p) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let q = self.nodes[b.0].shape[1];
                self.accumulate(a, |g| {
                    for i in 0..m {
                        for j in 0..p {
                            g[i * p + j] += go[i * (p + q) + j];
                        }
                    }
                });
                self.accumulate(b, |g| {
                    for i in 0..m {
                        for j in 0..q {
                            g[i * q + j] += go[i * (p + q) + p + j];
                        }
                    }
                });
            }
            Op::GatherRows(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let n = self.nodes[a.0].shape[1];
                self.accumulate(a, |g| {
                    for (out_row, &src_row) in indices.iter().enumerate() {
                        for j in 0..n {
                            g[src_row * n + j] += go[out_row * n + j];
                        }
                    }
                });
            }
            &Op::Reshape(a) => self.accumulate(a, |g| add_assign(g, go)),
            &Op::Sum(a) => {
                let s = go[0];
                self.accumulate(a, |g| {
                    for gi in g.iter_mut() {
                        *gi += s;
                    }
                });
            }
            &Op::Mean(a) => {
                let len = self.nodes[a.0].value.len().max(1);
                let s = go[0] / len as f64;
                self.accumulate(a, |g| {
                    for gi in g.iter_mut() {
                        *gi += s;
                    }
                });
            }
            &Op::Relu(a) => {
                let xv = self.nodes[a.0].value.clone();
                self.accumulate(a, |g| {
                    for ((gi, &x), &dgo) in g.iter_mut().zip(&xv).zip(go) {
                        if x > 0.0 {
                            *gi += dgo;
                        }
                    }
                });
            }
            &Op::LeakyRelu(a, slope) => {
                let xv = self.nodes[a.0].value.clone();
                self.accumulate(a, |g| {
                    for ((gi, &x), &dgo) in g.iter_mut().zip(&xv).zip(go) {
                        *gi += if x >= 0.0 { dgo } else { slope * dgo };
                    }
                });
            }
            &Op::SoftmaxRows(a) => {
                let (m, n) = (self.nodes[idx].shape[0], self.nodes[idx].shape[1]);
                let yv = self.nodes[idx].value.clone();
                self.accumulate(a, |g| {
                    for i in 0..m {
                        let y = &yv[i * n..(i + 1) * n];
                        let dy = &go[i * n..(i + 1) * n];
                        let dot: f64 = y.iter().zip(dy).map(|(&yi, &dyi)| yi * dyi).sum();
                        for j in 0..n {
                            g[i * n + j] += y[j] * (dy[j] - dot);
                        }
                    }
                });
            }
            &Op::Square(a) => {
                let xv = self.nodes[a.0].value.clone();
                self.accumulate(a, |g| {
                    for ((gi, &x), &dgo) in g.iter_mut().zip(&xv).zip(go) {
                        *gi += 2.0 * x * dgo;
                    }
                });
            }
            &Op::Pick(a, index) => {
                let s = go[0];
                self.accumulate(a, |g| g[index] += s);
            }
        }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::scalar(3.0), true);
        let y = g.square(x);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::scalar(1.5), true);
        let y = g.add(x, x);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::matrix(1, 4, vec![0.7; 4]).unwrap(), false);
        let y = g.softmax_rows(x);
        for &v in g.value(y) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sum_has_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::matrix(1, 5, vec![0.3, -1.0, 2.0, 0.0, 0.4]).unwrap(), true);
        let y = g.softmax_rows(x);
        let s = g.sum(y);
        assert!((g.value(s)[0] - 1.0).abs() < 1e-12);
        g.backward(s).unwrap();
        for &v in g.grad(x).unwrap() {
            assert!(v.abs() < 1e-12, "gradient {v} not ~0");
        }
    }

    #[test]
    fn matmul_with_identity_is_unchanged() {
        let mut g = Graph::new();
        let a = g.leaf(&Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(), false);
        let eye = g.leaf(&Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(), false);
        let out = g.matmul(a, eye);
        assert_eq!(g.value(out), g.value(a));
    }

    #[test]
    fn leaky_relu_negative_slope() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::vector(vec![-1.0, 2.0]), false);
        let y = g.leaky_relu(x, 0.2);
        assert_eq!(g.value(y), &[-0.2, 2.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::vector(vec![1.0, 2.0]), true);
        let y = g.relu(x);
        assert!(matches!(
            g.backward(y),
            Err(AutogradError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn repeated_backward_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(&Tensor::scalar(2.0), true);
        let y = g.square(x);
        g.backward(y).unwrap();
        assert!(matches!(g.backward(y), Err(AutogradError::RepeatedBackward)));
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn add_shape_mismatch_panics_with_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(&Tensor::vector(vec![1.0, 2.0]), false);
        let b = g.leaf(&Tensor::vector(vec![1.0, 2.0, 3.0]), false);
        g.add(a, b);
    }

    #[test]
    fn two_layer_mlp_matches_finite_differences() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut random = |shape: Vec<usize>| {
            let len = shape.iter().product();
            Tensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let x = random(vec![1, 4]);
        let w1 = random(vec![4, 6]);
        let b1 = random(vec![6]);
        let w2 = random(vec![6, 3]);
        let b2 = random(vec![3]);

        // loss(params) built on a fresh graph each call
        let eval = |w1: &Tensor, b1: &Tensor, w2: &Tensor, b2: &Tensor, want_grads: bool| {
            let mut g = Graph::new();
            let xn = g.leaf(&x, false);
            let w1n = g.leaf(w1, want_grads);
            let b1n = g.leaf(b1, want_grads);
            let w2n = g.leaf(w2, want_grads);
            let b2n = g.leaf(b2, want_grads);
            let h = g.matmul(xn, w1n);
            let h = g.add_row(h, b1n);
            let h = g.relu(h);
            let o = g.matmul(h, w2n);
            let o = g.add_row(o, b2n);
            let sq = g.square(o);
            let loss = g.sum(sq);
            (g, [w1n, b1n, w2n, b2n], loss)
        };

        let (mut g, nodes, loss) = eval(&w1, &b1, &w2, &b2, true);
        g.backward(loss).unwrap();
        let analytic: Vec<Vec<f64>> = nodes.iter().map(|&n| g.grad(n).unwrap().to_vec()).collect();

        let h = 1e-5;
        let params = [&w1, &b1, &w2, &b2];
        for (pi, param) in params.iter().enumerate() {
            for j in 0..param.len() {
                let mut plus = (*param).clone();
                plus.data_mut()[j] += h;
                let mut minus = (*param).clone();
                minus.data_mut()[j] -= h;
                let with = |replacement: &Tensor| {
                    let slot: Vec<&Tensor> = params
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| if k == pi { replacement } else { p })
                        .collect();
                    let (g, _, loss) = eval(slot[0], slot[1], slot[2], slot[3], false);
                    g.value(loss)[0]
                };
                let fd = (with(&plus) - with(&minus)) / (2.0 * h);
                let ana = analytic[pi][j];
                let denom = fd.abs().max(ana.abs()).max(1.0);
                assert!(
                    ((fd - ana) / denom).abs() < 1e-4,
                    "param {pi} elem {j}: fd {fd} vs analytic {ana}"
                );
            }
        }
    }
}
