//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Graph`] is a tape: every op appends a node holding its forward value,
//! and [`Graph::backward`] walks the tape once in reverse, accumulating
//! vector-Jacobian products. Parameters are borrowed, not copied, so building a
//! graph per mini-batch is cheap. Nodes that depend on no parameter carry no
//! gradient and are skipped on the way back.

use std::borrow::Cow;

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};

pub type Tensor = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param,
    /// `a · bᵀ`
    MatMulBt(NodeId, NodeId),
    /// `a + b` with `b` a single row broadcast over `a`'s rows.
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LeakyRelu(NodeId, f64),
    /// Mean cross-entropy of row-softmax(logits) against one-hot targets.
    SoftmaxCrossEntropy { logits: NodeId, targets: Tensor, probs: Tensor },
    /// Mean binary cross-entropy of sigmoid(logits) against a constant target.
    BceWithLogits { logits: NodeId, target: f64 },
    Sum(Vec<NodeId>),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of one scalar with respect to every node that needed one.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// The gradient of `id`, or zeros shaped like `like` when nothing flowed.
    pub fn take_or_zeros(&mut self, id: NodeId, like: &Tensor) -> Tensor {
        self.grads
            .get_mut(id.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(like.raw_dim()))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, name: &'static str) -> Result<NodeId> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = match &op {
            Op::Input => false,
            Op::Param => true,
            Op::MatMulBt(a, b) | Op::AddRow(a, b) | Op::Add(a, b) | Op::Mul(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::Scale(a, _) | Op::Sigmoid(a) | Op::Tanh(a) | Op::LeakyRelu(a, _) => self.needs(*a),
            Op::SoftmaxCrossEntropy { logits, .. } | Op::BceWithLogits { logits, .. } => self.needs(*logits),
            Op::Sum(xs) => xs.iter().any(|x| self.needs(*x)),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// A constant. No gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Cow::Owned(value), Op::Input, "input")
    }

    /// A borrowed trainable tensor.
    pub fn param(&mut self, value: &'a Tensor) -> Result<NodeId> {
        self.push(Cow::Borrowed(value), Op::Param, "param")
    }

    fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> Error {
        Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.dim(), b.dim()))
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.ncols() {
            return Err(Self::shape_err("matmul_bt", va, vb));
        }
        let v = va.dot(&vb.t());
        self.push(Cow::Owned(v), Op::MatMulBt(a, b), "matmul")
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(row));
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(Self::shape_err("add_row", va, vb));
        }
        let v = va + vb;
        self.push(Cow::Owned(v), Op::AddRow(a, row), "add_row")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(Self::shape_err("add", va, vb));
        }
        let v = va + vb;
        self.push(Cow::Owned(v), Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(Self::shape_err("mul", va, vb));
        }
        let v = va * vb;
        self.push(Cow::Owned(v), Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let v = self.value(a) * c;
        self.push(Cow::Owned(v), Op::Scale(a, c), "scale")
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).mapv(sigmoid);
        self.push(Cow::Owned(v), Op::Sigmoid(a), "sigmoid")
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).mapv(f64::tanh);
        self.push(Cow::Owned(v), Op::Tanh(a), "tanh")
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(Cow::Owned(v), Op::LeakyRelu(a, slope), "leaky_relu")
    }

    /// Scalar `−(1/N) Σ_i Σ_j y_ij log softmax(z)_ij`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: Tensor) -> Result<NodeId> {
        let z = self.value(logits);
        if z.dim() != targets.dim() || z.nrows() == 0 {
            return Err(Self::shape_err("softmax_cross_entropy", z, &targets));
        }
        let probs = softmax_rows(z);
        let n = z.nrows() as f64;
        let mut loss = 0.0;
        for (zr, yr) in z.rows().into_iter().zip(targets.rows()) {
            let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + zr.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss -= zr.iter().zip(yr).map(|(zv, y)| y * (zv - lse)).sum::<f64>();
        }
        let v = Tensor::from_elem((1, 1), loss / n);
        self.push(Cow::Owned(v), Op::SoftmaxCrossEntropy { logits, targets, probs }, "cross_entropy")
    }

    /// Scalar mean of `−[t log σ(z) + (1 − t) log(1 − σ(z))]` over all entries.
    pub fn bce_with_logits(&mut self, logits: NodeId, target: f64) -> Result<NodeId> {
        let z = self.value(logits);
        if z.is_empty() {
            return Err(Error::ShapeMismatch("bce_with_logits on an empty tensor".into()));
        }
        let loss = z.iter().map(|&v| softplus(v) - target * v).sum::<f64>() / z.len() as f64;
        let v = Tensor::from_elem((1, 1), loss);
        self.push(Cow::Owned(v), Op::BceWithLogits { logits, target }, "bce")
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let mut total = 0.0;
        for &t in terms {
            let v = self.value(t);
            if v.dim() != (1, 1) {
                return Err(Error::ShapeMismatch(format!("sum expects scalars, got {:?}", v.dim())));
            }
            total += v[[0, 0]];
        }
        self.push(Cow::Owned(Tensor::from_elem((1, 1), total)), Op::Sum(terms.to_vec()), "sum")
    }

    /// Gradients of the scalar `loss` with respect to every parameter-dependent node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        self.backward_with(loss, 1.0)
    }

    /// As [`Graph::backward`], with the upstream gradient of `loss` set to `seed`.
    pub fn backward_with(&self, loss: NodeId, seed: f64) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Graph("backward called before the forward pass was recorded".into()));
        }
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::Graph(format!("loss must be a scalar, got {:?}", self.value(loss).dim())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_elem((1, 1), seed));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Input => {}
                Op::Param => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMulBt(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = g.t().dot(self.value(*a));
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.needs(*row) {
                        let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, *row, db);
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, &g * self.value(*b));
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&*node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&*node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    accumulate(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= if x > 0.0 { 1.0 } else { *slope });
                    accumulate(&mut grads, *a, d);
                }
                Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                    let scale = g[[0, 0]] / probs.nrows() as f64;
                    let d = (probs - targets) * scale;
                    accumulate(&mut grads, *logits, d);
                }
                Op::BceWithLogits { logits, target } => {
                    let z = self.value(*logits);
                    let scale = g[[0, 0]] / z.len() as f64;
                    let d = z.mapv(|v| (sigmoid(v) - target) * scale);
                    accumulate(&mut grads, *logits, d);
                }
                Op::Sum(terms) => {
                    for t in terms {
                        if self.needs(*t) {
                            accumulate(&mut grads, *t, g.clone());
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_ce_gradient_is_p_minus_y() {
        let w = array![[0.3, -1.2, 2.0, 0.1]];
        let y = array![[0.0, 0.0, 1.0, 0.0]];
        let mut g = Graph::new();
        let z = g.param(&w).unwrap();
        let loss = g.softmax_cross_entropy(z, y.clone()).unwrap();
        let grads = g.backward(loss).unwrap();
        let expected = softmax_rows(&w) - &y;
        for (a, b) in grads.get(z).unwrap().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_before_forward() {
        let g = Graph::new();
        assert!(matches!(g.backward(NodeId(0)), Err(Error::Graph(_))));
        let w = array![[1.0, 2.0]];
        let mut g = Graph::new();
        let p = g.param(&w).unwrap();
        assert!(matches!(g.backward(p), Err(Error::Graph(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let w = array![[0.5, -0.25], [1.5, 2.0]];
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let mut g = Graph::new();
        let pw = g.param(&w).unwrap();
        let px = g.input(x).unwrap();
        let h = g.matmul_bt(px, pw).unwrap();
        let h = g.tanh(h).unwrap();
        let loss = g.bce_with_logits(h, 1.0).unwrap();
        let grads = g.backward_with(loss, 0.0).unwrap();
        assert!(grads.get(pw).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inputs_get_no_gradient() {
        let w = array![[0.5]];
        let mut g = Graph::new();
        let x = g.input(array![[2.0]]).unwrap();
        let p = g.param(&w).unwrap();
        let y = g.mul(x, p).unwrap();
        let l = g.bce_with_logits(y, 0.0).unwrap();
        let grads = g.backward(l).unwrap();
        assert!(grads.get(x).is_none());
        assert!(grads.get(p).is_some());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let w = array![[f64::MAX]];
        let mut g = Graph::new();
        let p = g.param(&w).unwrap();
        assert!(matches!(g.scale(p, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = array![[1.0, 2.0, -3.0], [1000.0, 1001.0, 999.0]];
        let p = softmax_rows(&z);
        let q = softmax_rows(&(&z + 17.5));
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
