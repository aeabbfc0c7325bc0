use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Named, ordered access to a model's trainable tensors.
///
/// `tensors` and `tensors_mut` must list the same tensors in the same order;
/// optimizers, gradient checks and archives all rely on that order.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Uniform(−s, s) with `s = 1/√fan_in`.
pub fn init_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Tensor {
    let s = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-s..s))
}

/// Fully connected layer, `y = x Wᵀ + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Self { w: init_uniform(output, input, input, rng), b: Array2::zeros((1, output)) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> Result<DenseNodes> {
        Ok(DenseNodes { w: g.param(&self.w)?, b: g.param(&self.b)? })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DenseNodes {
    pub w: NodeId,
    pub b: NodeId,
}

impl DenseNodes {
    pub fn forward(&self, g: &mut Graph<'_>, x: NodeId) -> Result<NodeId> {
        let h = g.matmul_bt(x, self.w)?;
        g.add_row(h, self.b)
    }

    pub fn ids(&self) -> [NodeId; 2] {
        [self.w, self.b]
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Multi-layer perceptron with leaky-ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub slope: f64,
}

impl Mlp {
    /// `sizes` lists every width from input to output.
    pub fn new(sizes: &[usize], slope: f64, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad MLP layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Ok(Self { layers, slope })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> Result<MlpNodes> {
        let layers = self.layers.iter().map(|l| l.bind(g)).collect::<Result<_>>()?;
        Ok(MlpNodes { layers, slope: self.slope })
    }
}

pub struct MlpNodes {
    layers: Vec<DenseNodes>,
    slope: f64,
}

impl MlpNodes {
    pub fn forward(&self, g: &mut Graph<'_>, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h)?;
            if i + 1 < self.layers.len() {
                h = g.leaky_relu(h, self.slope)?;
            }
        }
        Ok(h)
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(DenseNodes::ids).collect()
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.tensors().into_iter().map(move |(n, t)| (format!("{i}.{n}"), t)))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

/// One LSTM layer. Gate weights are `hidden × input`, recurrent weights
/// `hidden × hidden`, biases `1 × hidden`; gate order is i, f, o, g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w: [Tensor; 4],
    pub u: [Tensor; 4],
    pub b: [Tensor; 4],
}

pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];
const FORGET: usize = 1;

impl LstmParams {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let w = std::array::from_fn(|_| init_uniform(hidden_dim, input_dim, input_dim, rng));
        let u = std::array::from_fn(|_| init_uniform(hidden_dim, hidden_dim, hidden_dim, rng));
        let mut b: [Tensor; 4] = std::array::from_fn(|_| Array2::zeros((1, hidden_dim)));
        b[FORGET].fill(1.0);
        Self { w, u, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w[0].nrows()
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> Result<LstmNodes> {
        let mut ids = Vec::with_capacity(12);
        for t in self.w.iter().chain(&self.u).chain(&self.b) {
            ids.push(g.param(t)?);
        }
        Ok(LstmNodes {
            w: [ids[0], ids[1], ids[2], ids[3]],
            u: [ids[4], ids[5], ids[6], ids[7]],
            b: [ids[8], ids[9], ids[10], ids[11]],
            input_dim: self.input_dim(),
        })
    }
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(12);
        for (prefix, group) in [("w", &self.w), ("u", &self.u), ("b", &self.b)] {
            for (name, t) in GATE_NAMES.iter().zip(group.iter()) {
                out.push((format!("{prefix}_{name}"), t));
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.w.iter_mut().chain(self.u.iter_mut()).chain(self.b.iter_mut()).collect()
    }
}

pub struct LstmNodes {
    w: [NodeId; 4],
    u: [NodeId; 4],
    b: [NodeId; 4],
    input_dim: usize,
}

impl LstmNodes {
    pub fn ids(&self) -> Vec<NodeId> {
        self.w.iter().chain(&self.u).chain(&self.b).copied().collect()
    }

    /// Run the recurrence over `steps` (each `batch × input`) from
    /// `h_0 = c_0 = 0` and return the final hidden state `h_S`.
    ///
    /// ```text
    /// i, f, o = σ(W x_t + U h_{t−1} + b)     g = tanh(W_g x_t + U_g h_{t−1} + b_g)
    /// c_t = f ⊙ c_{t−1} + i ⊙ g              h_t = o ⊙ tanh(c_t)
    /// ```
    pub fn forward(&self, g: &mut Graph<'_>, steps: &[NodeId]) -> Result<NodeId> {
        if steps.is_empty() {
            return Err(Error::ShapeMismatch("LSTM needs at least one step".into()));
        }
        let mut state: Option<(NodeId, NodeId)> = None;
        for &x in steps {
            if g.value(x).ncols() != self.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "LSTM input has {} features, expected {}",
                    g.value(x).ncols(),
                    self.input_dim
                )));
            }
            let mut pre = [x; 4];
            for (k, slot) in pre.iter_mut().enumerate() {
                let mut z = g.matmul_bt(x, self.w[k])?;
                // h_0 = 0, so the recurrent term vanishes on the first step.
                if let Some((h, _)) = state {
                    let r = g.matmul_bt(h, self.u[k])?;
                    z = g.add(z, r)?;
                }
                *slot = g.add_row(z, self.b[k])?;
            }
            let i = g.sigmoid(pre[0])?;
            let f = g.sigmoid(pre[1])?;
            let o = g.sigmoid(pre[2])?;
            let cand = g.tanh(pre[3])?;
            let ig = g.mul(i, cand)?;
            let c = match state {
                Some((_, c_prev)) => {
                    let fc = g.mul(f, c_prev)?;
                    g.add(fc, ig)?
                }
                None => ig,
            };
            let tc = g.tanh(c)?;
            let h = g.mul(o, tc)?;
            state = Some((h, c));
        }
        Ok(state.expect("at least one step").0)
    }
}

/// Final hidden state of a single sequence (`S × input`).
pub fn lstm_forward(params: &LstmParams, seq: &Tensor) -> Result<ndarray::Array1<f64>> {
    if seq.ncols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "sequence has {} features, LSTM expects {}",
            seq.ncols(),
            params.input_dim()
        )));
    }
    let mut g = Graph::new();
    let nodes = params.bind(&mut g)?;
    let steps = seq
        .rows()
        .into_iter()
        .map(|r| g.input(r.to_owned().insert_axis(ndarray::Axis(0))))
        .collect::<Result<Vec<_>>>()?;
    let h = nodes.forward(&mut g, &steps)?;
    Ok(g.value(h).row(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_params_stay_at_zero() {
        let mut p = LstmParams::new(3, 4, &mut seeded(0));
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        let seq = Array2::from_shape_fn((5, 3), |(i, j)| (i + j) as f64);
        assert!(lstm_forward(&p, &seq).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_matches_hand_unrolled_cell() {
        let mut rng = seeded(9);
        let p = LstmParams::new(3, 2, &mut rng);
        let x = [0.4, -1.1, 0.7];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |k: usize, r: usize| -> f64 {
            p.b[k][[0, r]] + (0..3).map(|c| p.w[k][[r, c]] * x[c]).sum::<f64>()
        };
        let h = lstm_forward(&p, &Array2::from_shape_vec((1, 3), x.to_vec()).unwrap()).unwrap();
        for r in 0..2 {
            let c = sig(pre(0, r)) * pre(3, r).tanh();
            let expect = sig(pre(2, r)) * c.tanh();
            assert!((h[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let p = LstmParams::new(5, 3, &mut seeded(1));
        assert!(p.b[1].iter().all(|&v| v == 1.0));
        assert!(p.b[0].iter().all(|&v| v == 0.0));
        let s = 1.0 / 5f64.sqrt();
        assert!(p.w[0].iter().all(|v| v.abs() < s));
        assert_eq!(p.num_parameters(), 4 * (3 * 5 + 3 * 3 + 3));
    }

    #[test]
    fn shape_mismatch() {
        let p = LstmParams::new(3, 2, &mut seeded(0));
        assert!(matches!(lstm_forward(&p, &Array2::zeros((4, 2))), Err(Error::ShapeMismatch(_))));
    }
}
