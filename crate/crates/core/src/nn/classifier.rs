//! LSTM sequence classifier: one recurrent layer, a dense softmax head, and
//! mini-batch training on the log loss.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::{softmax_rows, Graph, NodeId, Tensor};
use super::layers::{Dense, DenseNodes, LstmNodes, LstmParams, Parameters};
use super::loss::{argmax_rows, cross_entropy, one_hot};
use super::optim::{clip_global_norm, Optimizer, OptimizerKind};
use crate::data_model::{Dataset, LabeledWindow, Split, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng;

const PREDICT_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Filled in per run from the global seed; never read from config files.
    #[serde(skip)]
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerKind::default(),
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub lstm: LstmParams,
    /// `C × hidden` output layer.
    pub out: Dense,
}

impl Parameters for ClassifierParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v: Vec<(String, &Tensor)> =
            self.lstm.tensors().into_iter().map(|(n, t)| (format!("lstm.{n}"), t)).collect();
        v.extend(self.out.tensors().into_iter().map(|(n, t)| (format!("out.{n}"), t)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.lstm.tensors_mut();
        v.extend(self.out.tensors_mut());
        v
    }
}

pub struct ClassifierNodes {
    lstm: LstmNodes,
    out: DenseNodes,
}

impl ClassifierNodes {
    pub fn ids(&self) -> Vec<NodeId> {
        let mut v = self.lstm.ids();
        v.extend(self.out.ids());
        v
    }

    /// Logits (`batch × C`) for one step-major batch.
    pub fn logits(&self, g: &mut Graph<'_>, steps: &[NodeId]) -> Result<NodeId> {
        let h = self.lstm.forward(g, steps)?;
        self.out.forward(g, h)
    }
}

/// Stack the `t`-th row of every sequence into step tensors `batch × width`.
pub fn step_major(seqs: &[&Array2<f64>]) -> Result<Vec<Tensor>> {
    let first = seqs.first().ok_or(Error::EmptyDataset("empty batch"))?;
    let (steps, width) = first.dim();
    if let Some(bad) = seqs.iter().find(|s| s.dim() != (steps, width)) {
        return Err(Error::ShapeMismatch(format!(
            "sequence {:?} in a batch of {:?}",
            bad.dim(),
            (steps, width)
        )));
    }
    Ok((0..steps)
        .map(|t| {
            let mut x = Tensor::zeros((seqs.len(), width));
            for (b, s) in seqs.iter().enumerate() {
                x.row_mut(b).assign(&s.row(t));
            }
            x
        })
        .collect())
}

impl ClassifierParams {
    /// Fresh parameters: uniform(±1/√fan_in) weights, zero biases except the
    /// LSTM forget gate at 1.
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let lstm = LstmParams::new(input_dim, hidden_dim, &mut rng);
        let out = Dense::new(hidden_dim, NUM_CLASSES, &mut rng);
        Self { lstm, out }
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> Result<ClassifierNodes> {
        Ok(ClassifierNodes { lstm: self.lstm.bind(g)?, out: self.out.bind(g)? })
    }

    /// Mean cross-entropy over a batch, its gradient for every parameter (in
    /// [`Parameters`] order) and the batch's softmax probabilities.
    pub fn loss_and_grads(&self, seqs: &[&Array2<f64>], labels: &[usize]) -> Result<(f64, Vec<Tensor>, Tensor)> {
        let mut g = Graph::new();
        let nodes = self.bind(&mut g)?;
        let steps = step_major(seqs)?
            .into_iter()
            .map(|x| g.input(x))
            .collect::<Result<Vec<_>>>()?;
        let logits = nodes.logits(&mut g, &steps)?;
        let probs = softmax_rows(g.value(logits));
        let loss = g.softmax_cross_entropy(logits, one_hot(labels, NUM_CLASSES))?;
        let mut grads = g.backward(loss)?;
        let tensors = self.tensors();
        let ids = nodes.ids();
        let out = ids.iter().zip(&tensors).map(|(&id, (_, t))| grads.take_or_zeros(id, t)).collect();
        Ok((g.value(loss)[[0, 0]], out, probs))
    }

    /// Mean loss only, for finite-difference checks.
    pub fn loss(&self, seqs: &[&Array2<f64>], labels: &[usize]) -> Result<f64> {
        let mut g = Graph::new();
        let nodes = self.bind(&mut g)?;
        let steps = step_major(seqs)?
            .into_iter()
            .map(|x| g.input(x))
            .collect::<Result<Vec<_>>>()?;
        let logits = nodes.logits(&mut g, &steps)?;
        let loss = g.softmax_cross_entropy(logits, one_hot(labels, NUM_CLASSES))?;
        Ok(g.value(loss)[[0, 0]])
    }

    /// Softmax class probabilities, one row per sequence.
    pub fn predict_proba(&self, seqs: &[&Array2<f64>]) -> Result<Tensor> {
        let mut out = Tensor::zeros((seqs.len(), NUM_CLASSES));
        for (c, chunk) in seqs.chunks(PREDICT_CHUNK).enumerate() {
            let mut g = Graph::new();
            let nodes = self.bind(&mut g)?;
            let steps = step_major(chunk)?
                .into_iter()
                .map(|x| g.input(x))
                .collect::<Result<Vec<_>>>()?;
            let logits = nodes.logits(&mut g, &steps)?;
            let probs = softmax_rows(g.value(logits));
            out.slice_mut(ndarray::s![c * PREDICT_CHUNK..c * PREDICT_CHUNK + chunk.len(), ..])
                .assign(&probs);
        }
        Ok(out)
    }

    pub fn predict(&self, seqs: &[&Array2<f64>]) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(seqs)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,split,loss,accuracy";

    pub fn csv_line(&self) -> String {
        let split = match self.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        format!("{},{split},{},{}", self.epoch, self.loss, self.accuracy)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: ClassifierParams,
    pub metrics: Vec<EpochMetrics>,
}

/// Loss and accuracy of `params` on a set of windows.
pub fn evaluate_windows(params: &ClassifierParams, windows: &[&LabeledWindow]) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate"));
    }
    let seqs: Vec<&Array2<f64>> = windows.iter().map(|w| &w.values).collect();
    let labels: Vec<usize> = windows.iter().map(|w| w.label.id()).collect();
    let probs = params.predict_proba(&seqs)?;
    let loss = cross_entropy(&probs, &one_hot(&labels, NUM_CLASSES))?;
    let correct = argmax_rows(&probs).iter().zip(&labels).filter(|(p, y)| p == y).count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

pub fn train_classifier(dataset: &Dataset, cfg: &TrainConfig, hidden_dim: usize) -> Result<TrainedClassifier> {
    train_classifier_with(dataset, cfg, hidden_dim, |_| {})
}

/// Mini-batch training on the train split, reporting each epoch's metrics to
/// `on_epoch` as they are produced.
///
/// Train metrics are averaged over the epoch's batches before each update;
/// when the dataset carries a test split it is evaluated after every epoch.
/// Everything random derives from `cfg.seed`.
pub fn train_classifier_with(
    dataset: &Dataset,
    cfg: &TrainConfig,
    hidden_dim: usize,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedClassifier> {
    cfg.validate()?;
    if hidden_dim == 0 {
        return Err(Error::InvalidArgument("hidden size must be at least 1".into()));
    }
    let train: Vec<&LabeledWindow> = dataset.train().collect();
    let test: Vec<&LabeledWindow> = dataset.test().collect();
    let first = train.first().ok_or(Error::EmptyDataset("train split is empty"))?;
    let mut params = ClassifierParams::new(first.width(), hidden_dim, rng::derive_seed(cfg.seed, "classifier-init", 0));
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut shuffle_rng = rng::seeded(rng::derive_seed(cfg.seed, "classifier-shuffle", 0));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let seqs: Vec<&Array2<f64>> = batch.iter().map(|&i| &train[i].values).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train[i].label.id()).collect();
            let (loss, mut grads, probs) = params.loss_and_grads(&seqs, &labels).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(&probs).iter().zip(&labels).filter(|(p, y)| p == y).count();
            clip_global_norm(&mut grads, cfg.grad_clip);
            optimizer.step(params.tensors_mut(), &grads);
        }
        let n = train.len() as f64;
        let m = EpochMetrics { epoch, split: Split::Train, loss: loss_sum / n, accuracy: correct as f64 / n };
        on_epoch(&m);
        metrics.push(m);
        if !test.is_empty() {
            let (loss, accuracy) = evaluate_windows(&params, &test).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
                other => other,
            })?;
            let m = EpochMetrics { epoch, split: Split::Test, loss, accuracy };
            on_epoch(&m);
            metrics.push(m);
        }
    }
    Ok(TrainedClassifier { params, metrics })
}
