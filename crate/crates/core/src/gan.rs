//! Per-class vanilla GAN for synthesizing training windows.
//!
//! The discriminator `D` ascends `E[log D(x)] + E[log(1 − D(G(z)))]`; the
//! generator uses the non-saturating surrogate and maximizes `E[log D(G(z))]`,
//! which has the same fixed points but does not stall while `D` is winning.
//! Training alternates one `D` step with one `G` step. At equilibrium `D`
//! cannot tell the two apart and outputs 0.5 on real data.
//!
//! Data are standardized per dimension before training and mapped back on
//! generation.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_model::{ActivityLabel, LabeledWindow};
use crate::error::{Error, Result};
use crate::nn::graph::{Graph, NodeId, Tensor};
use crate::nn::layers::{Mlp, Parameters};
use crate::nn::optim::{Optimizer, OptimizerKind};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanDomain {
    /// Flattened spectrogram feature windows.
    Features,
    /// Flattened raw amplitude windows, featurized after generation.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub domain: GanDomain,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            generator_hidden: vec![128, 128],
            discriminator_hidden: vec![128, 64],
            leaky_slope: 0.2,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            steps: 2000,
            batch_size: 32,
            domain: GanDomain::Features,
        }
    }
}

impl GanConfig {
    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("latent size and batch size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("GAN learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    fn optimizer(&self) -> Optimizer {
        Optimizer::new(OptimizerKind::Adam { beta1: self.beta1, beta2: self.beta2, eps: 1e-8 }, self.lr)
    }
}

/// Per-dimension affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    /// Zero-variance dimensions get a unit scale.
    pub fn fit(data: &Array2<f64>) -> Self {
        let mean = data.mean_axis(Axis(0)).expect("non-empty data");
        let std = data.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Self { mean, std }
    }

    pub fn forward(&self, data: &Array2<f64>) -> Array2<f64> {
        (data - &self.mean) / &self.std
    }

    pub fn inverse(&self, data: &Array2<f64>) -> Array2<f64> {
        data * &self.std + &self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanPair {
    pub class_id: usize,
    pub latent_dim: usize,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub scaler: Standardizer,
}

impl GanPair {
    pub fn feature_dim(&self) -> usize {
        self.generator.output_dim()
    }
}

/// Averages over one pass through the real data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanTrainState {
    pub epoch: usize,
    /// Total optimizer steps taken when the epoch closed.
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Mean `D(x)` over the real batches of the epoch.
    pub d_real_mean: f64,
}

#[derive(Debug, Clone)]
pub struct GanRun {
    pub pair: GanPair,
    pub trace: Vec<GanTrainState>,
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn diverged(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) => Error::Diverged { epoch: step, loss: f64::NAN },
        other => other,
    }
}

/// `−E[log D(x)] − E[log(1 − D(x̃))]`, the negated value objective, with its
/// gradient for every discriminator parameter.
pub fn discriminator_step(d: &Mlp, real: &Tensor, fake: &Tensor) -> Result<(f64, Vec<Tensor>, f64)> {
    let mut g = Graph::new();
    let nodes = d.bind(&mut g)?;
    let xr = g.input(real.clone())?;
    let xf = g.input(fake.clone())?;
    let lr = nodes.forward(&mut g, xr)?;
    let lf = nodes.forward(&mut g, xf)?;
    let d_real_mean = g.value(lr).mapv(|z| 1.0 / (1.0 + (-z).exp())).mean().unwrap_or(0.0);
    let real_term = g.bce_with_logits(lr, 1.0)?;
    let fake_term = g.bce_with_logits(lf, 0.0)?;
    let loss = g.sum(&[real_term, fake_term])?;
    let mut grads = g.backward(loss)?;
    let out = collect(&mut grads, &nodes.ids(), d);
    Ok((g.value(loss)[[0, 0]], out, d_real_mean))
}

/// Non-saturating generator loss `−E[log D(G(z))]` and its gradient for every
/// generator parameter. The real data never enter this graph.
pub fn generator_step(gen: &Mlp, d: &Mlp, z: &Tensor) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let gn = gen.bind(&mut g)?;
    let dn = d.bind(&mut g)?;
    let zin = g.input(z.clone())?;
    let fake = gn.forward(&mut g, zin)?;
    let logits = dn.forward(&mut g, fake)?;
    let loss = g.bce_with_logits(logits, 1.0)?;
    let mut grads = g.backward(loss)?;
    let out = collect(&mut grads, &gn.ids(), gen);
    Ok((g.value(loss)[[0, 0]], out))
}

fn collect(grads: &mut crate::nn::graph::Gradients, ids: &[NodeId], model: &impl Parameters) -> Vec<Tensor> {
    ids.iter().zip(model.tensors()).map(|(&id, (_, t))| grads.take_or_zeros(id, t)).collect()
}

fn generate_scaled(gen: &Mlp, z: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let nodes = gen.bind(&mut g)?;
    let zin = g.input(z.clone())?;
    let out = nodes.forward(&mut g, zin)?;
    Ok(g.value(out).clone())
}

/// Train one GAN on `real` (rows are flattened windows).
///
/// A trace entry closes every `ceil(N / batch)` steps and after the last step.
pub fn gan_train(real: &Array2<f64>, cfg: &GanConfig, class_id: usize, seed: u64) -> Result<GanRun> {
    cfg.validate()?;
    let (n, dim) = real.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("GAN needs at least 2 real windows, got {n}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("GAN data have zero width".into()));
    }
    let scaler = Standardizer::fit(real);
    let data = scaler.forward(real);

    let mut init_rng = rng::seeded(rng::derive_seed(seed, "gan-init", class_id as u64));
    let mut g_sizes = vec![cfg.latent_dim];
    g_sizes.extend(&cfg.generator_hidden);
    g_sizes.push(dim);
    let mut d_sizes = vec![dim];
    d_sizes.extend(&cfg.discriminator_hidden);
    d_sizes.push(1);
    let mut generator = Mlp::new(&g_sizes, cfg.leaky_slope, &mut init_rng)?;
    let mut discriminator = Mlp::new(&d_sizes, cfg.leaky_slope, &mut init_rng)?;
    let mut g_opt = cfg.optimizer();
    let mut d_opt = cfg.optimizer();

    let mut rng = rng::seeded(rng::derive_seed(seed, "gan-train", class_id as u64));
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos = n;
    let mut trace = Vec::new();
    let (mut d_sum, mut g_sum, mut real_sum, mut count) = (0.0, 0.0, 0.0, 0usize);

    for step in 0..cfg.steps {
        if pos + batch > n {
            order.shuffle(&mut rng);
            pos = 0;
        }
        let idx = &order[pos..pos + batch];
        pos += batch;
        let real_batch = data.select(Axis(0), idx);

        let z = normal_matrix(batch, cfg.latent_dim, &mut rng);
        let fake = generate_scaled(&generator, &z).map_err(diverged(step))?;
        let (d_loss, d_grads, d_real_mean) =
            discriminator_step(&discriminator, &real_batch, &fake).map_err(diverged(step))?;
        d_opt.step(discriminator.tensors_mut(), &d_grads);

        let z = normal_matrix(batch, cfg.latent_dim, &mut rng);
        let (g_loss, g_grads) = generator_step(&generator, &discriminator, &z).map_err(diverged(step))?;
        g_opt.step(generator.tensors_mut(), &g_grads);

        if !(d_loss.is_finite() && g_loss.is_finite()) {
            return Err(Error::Diverged { epoch: trace.len(), loss: d_loss + g_loss });
        }
        d_sum += d_loss;
        g_sum += g_loss;
        real_sum += d_real_mean;
        count += 1;
        if pos + batch > n || step + 1 == cfg.steps {
            let c = count as f64;
            trace.push(GanTrainState {
                epoch: trace.len(),
                step: step + 1,
                d_loss: d_sum / c,
                g_loss: g_sum / c,
                d_real_mean: real_sum / c,
            });
            (d_sum, g_sum, real_sum, count) = (0.0, 0.0, 0.0, 0);
        }
    }
    let pair = GanPair { class_id, latent_dim: cfg.latent_dim, generator, discriminator, scaler };
    Ok(GanRun { pair, trace })
}

/// `n` samples `G(z)`, `z ~ N(0, I)`, mapped back to data units. Rows are samples.
pub fn gan_generate(pair: &GanPair, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Ok(Array2::zeros((0, pair.feature_dim())));
    }
    let mut rng = rng::seeded(rng::derive_seed(seed, "gan-generate", pair.class_id as u64));
    let z = normal_matrix(n, pair.latent_dim, &mut rng);
    let scaled = generate_scaled(&pair.generator, &z)?;
    Ok(pair.scaler.inverse(&scaled))
}

/// Generated samples reshaped to `shape` windows and tagged synthetic.
pub fn gan_generate_windows(
    pair: &GanPair,
    n: usize,
    seed: u64,
    shape: (usize, usize),
) -> Result<Vec<LabeledWindow>> {
    if shape.0 * shape.1 != pair.feature_dim() {
        return Err(Error::DimensionMismatch { expected: pair.feature_dim(), actual: shape.0 * shape.1 });
    }
    let label = ActivityLabel::from_id(pair.class_id)
        .ok_or_else(|| Error::InvalidArgument(format!("class id {} out of range", pair.class_id)))?;
    let samples = gan_generate(pair, n, seed)?;
    Ok(samples
        .rows()
        .into_iter()
        .map(|r| {
            let values = r.to_owned().into_shape_with_order(shape).expect("size checked");
            LabeledWindow::synthetic(values, label)
        })
        .collect())
}

pub const BAND: (f64, f64) = (0.4, 0.6);
pub const BAND_EPOCHS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub final_d_real_mean: f64,
    /// First epoch from which `d_real_mean` stays within [0.4, 0.6] for 5
    /// consecutive epochs; `None` if that never happens.
    pub epochs_to_band: Option<usize>,
}

pub fn convergence_report(trace: &[GanTrainState]) -> Result<ConvergenceReport> {
    let last = trace.last().ok_or(Error::EmptyTrace)?;
    let inside: Vec<bool> =
        trace.iter().map(|s| (BAND.0..=BAND.1).contains(&s.d_real_mean)).collect();
    let epochs_to_band = inside
        .windows(BAND_EPOCHS)
        .position(|w| w.iter().all(|&b| b));
    Ok(ConvergenceReport { final_d_real_mean: last.d_real_mean, epochs_to_band })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(d: f64) -> GanTrainState {
        GanTrainState { epoch: 0, step: 0, d_loss: 0.0, g_loss: 0.0, d_real_mean: d }
    }

    #[test]
    fn report_on_constant_traces() {
        let at_half: Vec<_> = (0..8).map(|_| state(0.5)).collect();
        let r = convergence_report(&at_half).unwrap();
        assert_eq!(r.epochs_to_band, Some(0));
        assert_eq!(r.final_d_real_mean, 0.5);
        let winning: Vec<_> = (0..8).map(|_| state(0.99)).collect();
        assert_eq!(convergence_report(&winning).unwrap().epochs_to_band, None);
        assert!(matches!(convergence_report(&[]), Err(Error::EmptyTrace)));
    }

    #[test]
    fn band_needs_five_consecutive_epochs() {
        let vals = [0.9, 0.5, 0.5, 0.5, 0.5, 0.7, 0.45, 0.55, 0.5, 0.6, 0.4, 0.9];
        let trace: Vec<_> = vals.iter().map(|&v| state(v)).collect();
        assert_eq!(convergence_report(&trace).unwrap().epochs_to_band, Some(6));
        let short: Vec<_> = vals[..4].iter().map(|&v| state(v)).collect();
        assert_eq!(convergence_report(&short).unwrap().epochs_to_band, None);
    }

    #[test]
    fn standardizer_round_trip() {
        let data = ndarray::array![[1.0, 5.0, 2.0], [3.0, 5.0, -2.0], [2.0, 5.0, 0.0]];
        let s = Standardizer::fit(&data);
        assert_eq!(s.std[1], 1.0);
        let back = s.inverse(&s.forward(&data));
        for (a, b) in back.iter().zip(data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn generate_zero_and_shapes() {
        let data = Array2::from_shape_fn((6, 4), |(i, j)| (i * j) as f64 + 0.5 * i as f64);
        let cfg = GanConfig { steps: 3, ..GanConfig::default() };
        let run = gan_train(&data, &cfg, 2, 1).unwrap();
        assert_eq!(gan_generate(&run.pair, 0, 1).unwrap().nrows(), 0);
        let w = gan_generate_windows(&run.pair, 3, 1, (2, 2)).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|w| w.origin == crate::data_model::Origin::Synthetic));
        assert_eq!(w[0].label, ActivityLabel::Walk);
        assert!(gan_generate_windows(&run.pair, 3, 1, (3, 2)).is_err());
        assert!(gan_train(&data.slice(ndarray::s![..1, ..]).to_owned(), &cfg, 0, 1).is_err());
    }
}
