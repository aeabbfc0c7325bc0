//! Time-frequency features.
//!
//! Each PCA component is cut into overlapping segments, windowed and
//! transformed with a radix-2 FFT. The per-segment magnitude spectra of all
//! components are concatenated and log-compressed, giving one feature row per
//! LSTM step. Vigorous activities push energy into the higher bins.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    Hann,
    Rect,
}

impl WindowFn {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rect => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub win_len: usize,
    pub hop: usize,
    pub window_fn: WindowFn,
    pub fft_len: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { win_len: 256, hop: 128, window_fn: WindowFn::Hann, fft_len: 256 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.win_len == 0 || self.hop == 0 || self.hop > self.win_len {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= hop ({}) <= win_len ({})",
                self.hop, self.win_len
            )));
        }
        if self.fft_len < self.win_len || !self.fft_len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "fft_len {} must be a power of two >= win_len {}",
                self.fft_len, self.win_len
            )));
        }
        Ok(())
    }

    /// Frequency bins per segment, `fft_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Segment count for a signal of `len` samples, if it fits at least one.
    pub fn segments(&self, len: usize) -> Option<usize> {
        (len >= self.win_len).then(|| (len - self.win_len) / self.hop + 1)
    }
}

/// STFT magnitudes, `F × S` (rows are frequency bins, columns segments).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub bin_hz: f64,
    pub segment_s: f64,
}

impl Spectrogram {
    /// Energy-weighted mean bin index over the whole spectrogram.
    pub fn energy_centroid_bin(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (f, row) in self.magnitudes.rows().into_iter().enumerate() {
            let e: f64 = row.iter().map(|m| m * m).sum();
            num += f as f64 * e;
            den += e;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Bin holding the most energy summed over segments; lowest bin on ties.
    pub fn peak_bin(&self) -> usize {
        let energy: Vec<f64> =
            self.magnitudes.rows().into_iter().map(|r| r.iter().map(|m| m * m).sum()).collect();
        argmax(&energy)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// In-place iterative radix-2 decimation-in-time FFT. `data.len()` must be a
/// power of two.
pub fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        let twiddles: Vec<Complex64> =
            (0..half).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * twiddles[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// `|DFT|` of one zero-padded, windowed segment, bins `0..=fft_len/2`.
fn segment_magnitudes(segment: &[f64], window: &[f64], fft_len: usize, buf: &mut Vec<Complex64>) -> Vec<f64> {
    buf.clear();
    buf.extend(segment.iter().zip(window).map(|(x, w)| Complex64::new(x * w, 0.0)));
    buf.resize(fft_len, Complex64::new(0.0, 0.0));
    fft_in_place(buf);
    buf[..fft_len / 2 + 1].iter().map(|c| c.norm()).collect()
}

fn magnitudes(signal: &[f64], cfg: &StftConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let segments = cfg
        .segments(signal.len())
        .ok_or(Error::SignalTooShort { len: signal.len(), win_len: cfg.win_len })?;
    let window = cfg.window_fn.coefficients(cfg.win_len);
    let mut out = Array2::zeros((cfg.bins(), segments));
    let mut buf = Vec::with_capacity(cfg.fft_len);
    for s in 0..segments {
        let start = s * cfg.hop;
        let mags = segment_magnitudes(&signal[start..start + cfg.win_len], &window, cfg.fft_len, &mut buf);
        out.column_mut(s).assign(&ndarray::Array1::from(mags));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stft"));
    }
    Ok(out)
}

/// Short-time Fourier transform magnitudes of a real signal.
///
/// Segment `s` starts at sample `s * hop`; there are
/// `floor((len − win_len) / hop) + 1` of them.
pub fn stft(signal: &[f64], cfg: &StftConfig, sample_rate_hz: f64) -> Result<Spectrogram> {
    Ok(Spectrogram {
        magnitudes: magnitudes(signal, cfg)?,
        bin_hz: sample_rate_hz / cfg.fft_len as f64,
        segment_s: cfg.hop as f64 / sample_rate_hz,
    })
}

/// Spectrogram feature rows for a `T × k` component window.
///
/// Row `s` is `log(1 + |X_c[f, s]|)` for component `c = 0..k`, bin
/// `f = 0..F`, component-major. Output shape is `S × (k·F)`.
pub fn feature_sequence(window_components: ArrayView2<'_, f64>, cfg: &StftConfig) -> Result<Array2<f64>> {
    let (t, k) = window_components.dim();
    cfg.validate()?;
    let segments = cfg.segments(t).ok_or(Error::SignalTooShort { len: t, win_len: cfg.win_len })?;
    let f = cfg.bins();
    let mut out = Array2::zeros((segments, k * f));
    for c in 0..k {
        let signal = window_components.column(c).to_vec();
        let mags = magnitudes(&signal, cfg)?;
        for s in 0..segments {
            for b in 0..f {
                out[[s, c * f + b]] = mags[[b, s]].ln_1p();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// PCA component sequences fed to the LSTM directly, one step per frame.
    Raw,
    /// Spectrogram rows, one step per STFT segment.
    Stft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub stft: StftConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { kind: FeatureKind::Stft, stft: StftConfig::default() }
    }
}

impl FeatureConfig {
    pub fn extract(&self, components: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self.kind {
            FeatureKind::Raw => Ok(components.to_owned()),
            FeatureKind::Stft => feature_sequence(components, &self.stft),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(win: usize, hop: usize, fft: usize) -> StftConfig {
        StftConfig { win_len: win, hop, window_fn: WindowFn::Rect, fft_len: fft }
    }

    #[test]
    fn dc_signal() {
        let cfg = rect(16, 8, 16);
        let sg = stft(&[2.5; 40], &cfg, 100.0).unwrap();
        assert_eq!(sg.magnitudes.dim(), (9, 4));
        for s in 0..4 {
            assert!((sg.magnitudes[[0, s]] - 2.5 * 16.0).abs() < 1e-9);
            for f in 1..9 {
                assert!(sg.magnitudes[[f, s]] <= 1e-9);
            }
        }
        assert_eq!(sg.bin_hz, 100.0 / 16.0);
        assert_eq!(sg.segment_s, 0.08);
    }

    #[test]
    fn bin_centered_tone() {
        let cfg = rect(64, 32, 64);
        let signal: Vec<f64> = (0..256).map(|n| (2.0 * PI * 5.0 * n as f64 / 64.0).sin()).collect();
        let sg = stft(&signal, &cfg, 64.0).unwrap();
        for col in sg.magnitudes.columns() {
            assert_eq!(argmax(&col.to_vec()), 5);
        }
    }

    #[test]
    fn too_short_and_bad_config() {
        let cfg = StftConfig::default();
        assert!(matches!(stft(&[0.0; 100], &cfg, 1.0), Err(Error::SignalTooShort { len: 100, win_len: 256 })));
        assert!(rect(16, 17, 16).validate().is_err());
        assert!(rect(16, 8, 24).validate().is_err());
        assert!(rect(16, 8, 8).validate().is_err());
        assert!(rect(16, 0, 16).validate().is_err());
    }

    #[test]
    fn feature_shapes() {
        let cfg = rect(8, 4, 8);
        let one = Array2::from_shape_fn((8, 1), |(t, _)| t as f64);
        assert_eq!(feature_sequence(one.view(), &cfg).unwrap().dim(), (1, 5));
        let zeros = Array2::zeros((20, 3));
        let out = feature_sequence(zeros.view(), &cfg).unwrap();
        assert_eq!(out.dim(), (4, 15));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hann_is_periodic() {
        let w = WindowFn::Hann.coefficients(4);
        let expect = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
