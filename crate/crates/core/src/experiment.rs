//! Augmentation experiment: train the classifier on half of the real windows,
//! on that half completed with GAN windows, and on all real windows, then
//! compare held-out accuracy and log loss.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::{ClassifierConfig, WindowingConfig};
use crate::data_model::{segment, ActivityLabel, Dataset, LabeledWindow, Origin, Split, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::gan::{gan_generate, gan_train, GanConfig, GanDomain, GanPair, Standardizer};
use crate::ingest::LabeledRecording;
use crate::nn::loss::{argmax_rows, cross_entropy, one_hot};
use crate::nn::{train_classifier_with, ClassifierParams, EpochMetrics};
use crate::preprocess::{PcaConfig, Projector};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRow {
    pub real_fraction: f64,
    pub synthetic: bool,
}

/// Everything needed to go from raw windows to a trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub pca: PcaConfig,
    pub features: FeatureConfig,
    pub classifier: ClassifierConfig,
    pub gan: GanConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub rows: Vec<PlanRow>,
    pub test_fraction: f64,
    pub seeds: Vec<u64>,
    pub pipeline: Pipeline,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("a plan needs at least one row and one seed".into()));
        }
        if let Some(r) = self.rows.iter().find(|r| !(r.real_fraction > 0.0 && r.real_fraction <= 1.0)) {
            return Err(Error::Config(format!("real_fraction {} must lie in (0, 1]", r.real_fraction)));
        }
        Ok(())
    }
}

/// Segment every recording and tag a stratified test split.
pub fn build_dataset(recordings: &[LabeledRecording], windowing: &WindowingConfig, seed: u64) -> Result<Dataset> {
    let mut windows = Vec::new();
    for r in recordings {
        windows.extend(segment(&r.recording, r.label, windowing.window_len, windowing.stride)?);
    }
    Dataset::stratified(windows, windowing.test_fraction, seed)
}

/// Keep `floor(fraction · n_c)` train windows of each class, chosen uniformly
/// at random. The test split and window order are preserved.
pub fn subsample_per_class(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} must lie in (0, 1]")));
    }
    let mut by_class: BTreeMap<ActivityLabel, Vec<usize>> = BTreeMap::new();
    for (i, (w, split)) in dataset.iter().enumerate() {
        if split == Split::Train {
            by_class.entry(w.label).or_default().push(i);
        }
    }
    let mut keep = vec![false; dataset.len()];
    for (label, idx) in by_class.iter_mut() {
        let n_keep = (fraction * idx.len() as f64).floor() as usize;
        if n_keep == 0 {
            return Err(Error::EmptyClass(*label));
        }
        let mut rng = crate::rng::seeded(derive_seed(seed, label.name(), 0));
        idx.shuffle(&mut rng);
        for &i in &idx[..n_keep] {
            keep[i] = true;
        }
    }
    let mut out = Dataset::new();
    for (i, (w, split)) in dataset.iter().enumerate() {
        if split == Split::Test || keep[i] {
            out.push(w.clone(), split)?;
        }
    }
    Ok(out)
}

/// Fitted PCA projection, feature extraction and optional feature scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub projector: Projector,
    pub features: FeatureConfig,
    pub scaler: Option<Standardizer>,
}

impl FrontEnd {
    /// Fit on real training windows only.
    pub fn fit(real_train: &[&LabeledWindow], pipeline: &Pipeline) -> Result<Self> {
        if real_train.iter().any(|w| w.origin == Origin::Synthetic) {
            return Err(Error::InvalidArgument("front end must be fit on real windows".into()));
        }
        let projector = Projector::fit(real_train.iter().copied(), &pipeline.pca)?;
        let mut front = Self { projector, features: pipeline.features.clone(), scaler: None };
        if pipeline.classifier.standardize {
            let seqs = real_train.iter().map(|w| front.transform(&w.values)).collect::<Result<Vec<_>>>()?;
            let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
            let stacked = ndarray::concatenate(Axis(0), &views).expect("equal feature widths");
            front.scaler = Some(Standardizer::fit(&stacked));
        }
        Ok(front)
    }

    /// Raw `T × D` window to classifier input `S × width`.
    pub fn transform(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        let components = self.projector.transform(values.view())?;
        let feats = self.features.extract(components.view())?;
        Ok(match &self.scaler {
            Some(s) => s.forward(&feats),
            None => feats,
        })
    }

    /// Transform every window, keeping labels, origins and splits.
    pub fn transform_dataset(&self, dataset: &Dataset) -> Result<Dataset> {
        let mut out = Dataset::new();
        for (w, split) in dataset.iter() {
            let values = self.transform(&w.values)?;
            out.push(LabeledWindow { values, label: w.label, origin: w.origin }, split)?;
        }
        Ok(out)
    }
}

fn flatten_rows(windows: &[&LabeledWindow]) -> Array2<f64> {
    let width = windows[0].values.len();
    Array2::from_shape_fn((windows.len(), width), |(i, j)| {
        let w = &windows[i].values;
        w[[j / w.ncols(), j % w.ncols()]]
    })
}

/// Train one GAN per class present in `windows`. Samples are the flattened
/// windows; classes are processed in id order.
pub fn train_class_gans(
    windows: &[&LabeledWindow],
    classes: &[ActivityLabel],
    cfg: &GanConfig,
    seed: u64,
) -> Result<Vec<crate::gan::GanRun>> {
    classes
        .iter()
        .map(|&label| {
            let own: Vec<&LabeledWindow> = windows.iter().copied().filter(|w| w.label == label).collect();
            if own.is_empty() {
                return Err(Error::EmptyClass(label));
            }
            gan_train(&flatten_rows(&own), cfg, label.id(), seed)
        })
        .collect()
}

/// `n` synthetic classifier-input windows from one GAN. In the raw domain the
/// generated amplitude windows pass through `front`.
pub fn synthesize(
    pair: &GanPair,
    n: usize,
    seed: u64,
    domain: GanDomain,
    sample_shape: (usize, usize),
    front: &FrontEnd,
) -> Result<Vec<LabeledWindow>> {
    let label = ActivityLabel::from_id(pair.class_id)
        .ok_or_else(|| Error::InvalidArgument(format!("class id {} out of range", pair.class_id)))?;
    let (rows, cols) = sample_shape;
    if rows * cols != pair.feature_dim() {
        return Err(Error::DimensionMismatch { expected: pair.feature_dim(), actual: rows * cols });
    }
    let samples = gan_generate(pair, n, seed)?;
    samples
        .rows()
        .into_iter()
        .map(|r| {
            let values = r.to_owned().into_shape_with_order(sample_shape).expect("size checked");
            let values = match domain {
                GanDomain::Features => values,
                GanDomain::Raw => front.transform(&values.mapv(|a| a.max(0.0)))?,
            };
            Ok(LabeledWindow::synthetic(values, label))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub log_loss: f64,
}

/// Accuracy and log loss on the test split of `test`.
///
/// Synthetic windows are refused outright, even though [`Dataset`] already
/// keeps them out of its test split.
pub fn compute_metrics(params: &ClassifierParams, test: &Dataset) -> Result<Metrics> {
    let windows: Vec<&LabeledWindow> = test.test().collect();
    if windows.is_empty() {
        return Err(Error::EmptyDataset("test split is empty"));
    }
    if windows.iter().any(|w| w.origin != Origin::Real) {
        return Err(Error::SyntheticInTest);
    }
    let seqs: Vec<&Array2<f64>> = windows.iter().map(|w| &w.values).collect();
    let labels: Vec<usize> = windows.iter().map(|w| w.label.id()).collect();
    let probs = params.predict_proba(&seqs)?;
    let log_loss = cross_entropy(&probs, &one_hot(&labels, NUM_CLASSES))?;
    let correct = argmax_rows(&probs).iter().zip(&labels).filter(|(p, y)| p == y).count();
    Ok(Metrics { accuracy: correct as f64 / labels.len() as f64, log_loss })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub n_real: usize,
    pub n_synthetic: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub log_loss: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "n_real,n_synthetic,seed,accuracy,log_loss";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.n_real, self.n_synthetic, self.seed, self.accuracy, self.log_loss)
    }
}

/// One plan row run with one seed.
#[derive(Debug, Clone)]
pub struct RowResult {
    pub row: usize,
    pub metrics: MetricsRow,
    pub curves: Vec<EpochMetrics>,
}

/// Run a single plan row with a single seed.
///
/// Seeds for subsampling, GANs and classifier initialization are derived
/// from `seed` by stage name only, so rows sharing a seed share their
/// subsample and initial weights, and rerunning a row alone reproduces it.
pub fn run_row(pipeline: &Pipeline, row: PlanRow, seed: u64, dataset: &Dataset, index: usize) -> Result<RowResult> {
    let sub = subsample_per_class(dataset, row.real_fraction, derive_seed(seed, "subsample", 0))?;
    let real_train: Vec<&LabeledWindow> = sub.train().collect();
    let front = FrontEnd::fit(&real_train, pipeline)?;
    let mut train = front.transform_dataset(&sub)?;
    let n_real = real_train.len();
    let mut n_synthetic = 0;

    if row.synthetic {
        let full = dataset.class_counts(Split::Train);
        let kept = sub.class_counts(Split::Train);
        let missing: Vec<(ActivityLabel, usize)> = full
            .iter()
            .map(|(&label, &n)| (label, n - kept.get(&label).copied().unwrap_or(0)))
            .filter(|&(_, n)| n > 0)
            .collect();
        let classes: Vec<ActivityLabel> = missing.iter().map(|&(l, _)| l).collect();
        let gan_seed = derive_seed(seed, "gan", 0);
        let (source, shape) = match pipeline.gan.domain {
            GanDomain::Features => {
                let w: Vec<&LabeledWindow> = train.train().collect();
                let shape = w[0].values.dim();
                (w, shape)
            }
            GanDomain::Raw => (real_train.clone(), real_train[0].values.dim()),
        };
        let runs = train_class_gans(&source, &classes, &pipeline.gan, gan_seed)?;
        let mut synthetic = Vec::new();
        for (run, &(_, n)) in runs.iter().zip(&missing) {
            synthetic.extend(synthesize(&run.pair, n, gan_seed, pipeline.gan.domain, shape, &front)?);
        }
        n_synthetic = synthetic.len();
        for w in synthetic {
            train.push(w, Split::Train)?;
        }
    }

    let mut cfg = pipeline.classifier.train.clone();
    cfg.seed = derive_seed(seed, "classifier", 0);
    let mut curves = Vec::new();
    let trained = train_classifier_with(&train, &cfg, pipeline.classifier.hidden_dim, |m| curves.push(m.clone()))?;
    let m = compute_metrics(&trained.params, &train)?;
    Ok(RowResult {
        row: index,
        metrics: MetricsRow { n_real, n_synthetic, seed, accuracy: m.accuracy, log_loss: m.log_loss },
        curves,
    })
}

/// Per-row medians over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub row: PlanRow,
    pub n_real: f64,
    pub n_synthetic: f64,
    pub accuracy: f64,
    pub log_loss: f64,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "real_fraction,synthetic,n_real,n_synthetic,accuracy,log_loss";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.row.real_fraction, self.row.synthetic, self.n_real, self.n_synthetic, self.accuracy, self.log_loss
        )
    }
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    /// Row-major: every seed of row 0, then row 1, and so on.
    pub results: Vec<RowResult>,
    pub summary: Vec<SummaryRow>,
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn run_plan(plan: &ExperimentPlan, dataset: &Dataset) -> Result<PlanReport> {
    run_plan_with(plan, dataset, |_| {})
}

/// [`run_plan`], reporting each finished row/seed to `on_result`.
pub fn run_plan_with(
    plan: &ExperimentPlan,
    dataset: &Dataset,
    mut on_result: impl FnMut(&RowResult),
) -> Result<PlanReport> {
    plan.validate()?;
    if dataset.count(Split::Train) == 0 || dataset.count(Split::Test) == 0 {
        return Err(Error::EmptyDataset("experiments need both a train and a test split"));
    }
    let mut results = Vec::new();
    for (index, &row) in plan.rows.iter().enumerate() {
        for &seed in &plan.seeds {
            let r = run_row(&plan.pipeline, row, seed, dataset, index)?;
            on_result(&r);
            results.push(r);
        }
    }
    let summary = plan
        .rows
        .iter()
        .enumerate()
        .map(|(index, &row)| {
            let of_row: Vec<&MetricsRow> = results.iter().filter(|r| r.row == index).map(|r| &r.metrics).collect();
            let pick = |f: fn(&MetricsRow) -> f64| median(&of_row.iter().map(|m| f(m)).collect::<Vec<_>>());
            SummaryRow {
                row,
                n_real: pick(|m| m.n_real as f64),
                n_synthetic: pick(|m| m.n_synthetic as f64),
                accuracy: pick(|m| m.accuracy),
                log_loss: pick(|m| m.log_loss),
            }
        })
        .collect();
    Ok(PlanReport { results, summary })
}

impl PlanReport {
    pub fn report_csv(&self) -> String {
        let mut s = format!("{}\n", MetricsRow::CSV_HEADER);
        for r in &self.results {
            s.push_str(&r.metrics.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = format!("{}\n", SummaryRow::CSV_HEADER);
        for r in &self.summary {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    /// Per-epoch loss and accuracy of every classifier trained by the plan.
    pub fn curves_csv(&self) -> String {
        let mut s = format!("row,seed,{}\n", EpochMetrics::CSV_HEADER);
        for r in &self.results {
            for m in &r.curves {
                s.push_str(&format!("{},{},{}\n", r.row, r.metrics.seed, m.csv_line()));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(per_class: usize) -> Dataset {
        let mut ds = Dataset::new();
        for label in ActivityLabel::ALL {
            for i in 0..per_class {
                let w = LabeledWindow::real(Array2::from_elem((2, 3), i as f64), label);
                ds.push(w, Split::Train).unwrap();
            }
            ds.push(LabeledWindow::real(Array2::zeros((2, 3)), label), Split::Test).unwrap();
        }
        ds
    }

    #[test]
    fn subsample_floor_counts() {
        let ds = toy(10);
        let half = subsample_per_class(&ds, 0.5, 3).unwrap();
        assert!(half.class_counts(Split::Train).values().all(|&n| n == 5));
        assert_eq!(half.count(Split::Test), NUM_CLASSES);
        let same = subsample_per_class(&ds, 1.0, 3).unwrap();
        assert_eq!(same, ds);
        assert_eq!(half, subsample_per_class(&ds, 0.5, 3).unwrap());
        assert_ne!(half, subsample_per_class(&ds, 0.5, 4).unwrap());
    }

    #[test]
    fn subsample_rejects_emptied_class() {
        let ds = toy(1);
        assert!(matches!(subsample_per_class(&ds, 0.5, 0), Err(Error::EmptyClass(_))));
        assert!(subsample_per_class(&ds, 0.0, 0).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
