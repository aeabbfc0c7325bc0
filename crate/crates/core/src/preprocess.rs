//! PCA denoising of the amplitude streams.
//!
//! Subcarrier amplitudes move together when a body moves through the channel,
//! while the measurement noise is roughly independent per channel. Projecting
//! onto the top principal axes of the sample covariance keeps the shared motion
//! and drops most of the noise.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data_model::LabeledWindow;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k × D`, one principal axis per row.
    pub components: Array2<f64>,
    /// Eigenvalues matching `components`, non-increasing.
    pub explained_variance: Array1<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    /// Row `t` of the result is `components · (x_t − mean)`.
    pub fn transform(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: data.ncols() });
        }
        let centered = &data - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    /// Map projected rows back to the input space.
    pub fn inverse_transform(&self, projected: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if projected.ncols() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), actual: projected.ncols() });
        }
        Ok(projected.dot(&self.components) + &self.mean)
    }
}

/// Fit the top-`k` principal axes of `data` (rows are observations).
///
/// Uses the unbiased sample covariance (divisor `N − 1`). Each component is
/// signed so that its largest-magnitude entry is positive; equal eigenvalues
/// keep their original index order.
pub fn pca_fit(data: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 observations, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {}] for {n} observations of dimension {d}",
            (n - 1).min(d)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("PCA input contains non-finite values".into()));
    }
    let mean = data.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &data - &mean;
    let mut cov = centered.t().dot(&centered);
    cov /= (n - 1) as f64;

    let (values, vectors) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let lambda_max = values[order[0]].max(0.0);
    let rank = if lambda_max > 0.0 {
        let tol = lambda_max * d as f64 * f64::EPSILON;
        values.iter().filter(|&&v| v > tol).count()
    } else {
        0
    };
    if k > rank {
        let constant = centered.columns().into_iter().any(|c| c.iter().all(|&v| v == 0.0));
        if constant {
            return Err(Error::DegenerateInput(format!(
                "k = {k} exceeds the covariance rank {rank} and some channels are constant"
            )));
        }
    }

    let mut components = Array2::zeros((k, d));
    let mut explained = Array1::zeros(k);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let mut axis = vectors.column(idx).to_owned();
        let pivot = axis
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv.abs() { (i, v) } else { (bi, bv) })
            .0;
        if axis[pivot] < 0.0 {
            axis.mapv_inplace(|v| -v);
        }
        components.row_mut(r).assign(&axis);
        explained[r] = values[idx].max(0.0);
    }
    Ok(PcaModel { mean, components, explained_variance: explained })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `i` in column `i`,
/// in no particular order. Sweeps stop once the off-diagonal Frobenius norm
/// drops below `1e-12 · max(1, ‖A‖_F)` or after 100 sweeps.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m: Vec<f64> = a.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * frob.max(1.0);

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m, n);
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    let vectors = Array2::from_shape_vec((n, n), v).expect("n*n entries");
    (values, vectors)
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += m[i * n + j] * m[i * n + j];
            }
        }
    }
    sum.sqrt()
}

pub fn pca_transform(model: &PcaModel, window: &LabeledWindow) -> Result<Array2<f64>> {
    model.transform(window.values.view())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    /// Components kept (per block when `per_link` is set).
    pub k: usize,
    /// Fit one PCA per receive-antenna block of subcarriers instead of one
    /// over all channels.
    pub per_link: bool,
    /// Subcarriers per antenna, the block width used by `per_link`.
    pub subcarriers: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { k: 10, per_link: false, subcarriers: crate::data_model::DEFAULT_SUBCARRIERS }
    }
}

/// One or more PCA models over contiguous channel blocks, outputs concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub block_width: usize,
    pub blocks: Vec<PcaModel>,
}

impl Projector {
    /// Fit on every time step of every window in `windows`.
    ///
    /// With `per_link`, channels are split into blocks of `cfg.subcarriers` columns (one
    /// per receive antenna) and each block gets its own model.
    pub fn fit<'a>(
        windows: impl IntoIterator<Item = &'a LabeledWindow>,
        cfg: &PcaConfig,
    ) -> Result<Self> {
        let windows: Vec<&LabeledWindow> = windows.into_iter().collect();
        let first = windows.first().ok_or(Error::EmptyDataset("no windows to fit PCA on"))?;
        let d = first.width();
        let views: Vec<_> = windows.iter().map(|w| w.values.view()).collect();
        let stacked = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::ShapeMismatch(format!("cannot stack windows: {e}")))?;
        let block_width = if cfg.per_link { cfg.subcarriers } else { d };
        if block_width == 0 || d % block_width != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{d} channels do not split into blocks of {block_width}"
            )));
        }
        let blocks = (0..d / block_width)
            .map(|b| {
                let cols = stacked.slice(ndarray::s![.., b * block_width..(b + 1) * block_width]);
                pca_fit(cols, cfg.k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { block_width, blocks })
    }

    pub fn input_dim(&self) -> usize {
        self.block_width * self.blocks.len()
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.iter().map(PcaModel::k).sum()
    }

    pub fn transform(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: data.ncols() });
        }
        let parts = self
            .blocks
            .iter()
            .enumerate()
            .map(|(b, m)| {
                m.transform(data.slice(ndarray::s![.., b * self.block_width..(b + 1) * self.block_width]))
            })
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        Ok(ndarray::concatenate(Axis(1), &views).expect("equal row counts"))
    }
}
