//! Domain types shared by the whole pipeline.
//!
//! A [`CsiFrame`] is one time sample of the `n_rx × n_sub` channel matrix
//! (3 receive antennas × 30 OFDM subcarriers on the benchmark hardware). Frames
//! are grouped into a [`Recording`] per transceiver link, cut into
//! fixed-length [`LabeledWindow`]s by [`segment`], and collected with their
//! train/test tags in a [`Dataset`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const NUM_CLASSES: usize = 7;
pub const DEFAULT_RX: usize = 3;
pub const DEFAULT_SUBCARRIERS: usize = 30;

/// The seven activity classes. The discriminant is the class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityLabel {
    LieDown = 0,
    Fall = 1,
    Walk = 2,
    Run = 3,
    SitDown = 4,
    StandUp = 5,
    PickUp = 6,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; NUM_CLASSES] = [
        ActivityLabel::LieDown,
        ActivityLabel::Fall,
        ActivityLabel::Walk,
        ActivityLabel::Run,
        ActivityLabel::SitDown,
        ActivityLabel::StandUp,
        ActivityLabel::PickUp,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivityLabel::LieDown => "lie_down",
            ActivityLabel::Fall => "fall",
            ActivityLabel::Walk => "walk",
            ActivityLabel::Run => "run",
            ActivityLabel::SitDown => "sit_down",
            ActivityLabel::StandUp => "stand_up",
            ActivityLabel::PickUp => "pick_up",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityLabel {
    type Err = Error;

    /// Accepts the canonical names, numeric ids, and the file-name spellings
    /// used by the public benchmark (`bed`, `pickup`, `sitdown`, `standup`).
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        if let Ok(id) = key.parse::<usize>() {
            return Self::from_id(id)
                .ok_or_else(|| Error::InvalidArgument(format!("class id {id} out of range")));
        }
        let label = match key.as_str() {
            "lie_down" | "liedown" | "bed" => ActivityLabel::LieDown,
            "fall" => ActivityLabel::Fall,
            "walk" => ActivityLabel::Walk,
            "run" => ActivityLabel::Run,
            "sit_down" | "sitdown" => ActivityLabel::SitDown,
            "stand_up" | "standup" => ActivityLabel::StandUp,
            "pick_up" | "pickup" => ActivityLabel::PickUp,
            _ => return Err(Error::InvalidArgument(format!("unknown activity `{s}`"))),
        };
        Ok(label)
    }
}

/// One time sample of the channel matrix, stored in polar form.
///
/// Polar storage keeps amplitude and phase bit-exact through CSV round trips;
/// [`CsiFrame::h`] rebuilds the complex gain on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    timestamp: f64,
    n_rx: usize,
    n_sub: usize,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
}

impl CsiFrame {
    pub fn from_polar(
        timestamp: f64,
        n_rx: usize,
        n_sub: usize,
        amplitude: Vec<f64>,
        phase: Vec<f64>,
    ) -> Result<Self> {
        let d = n_rx * n_sub;
        if d == 0 {
            return Err(Error::InvalidArgument("frame must have at least one entry".into()));
        }
        if amplitude.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: amplitude.len() });
        }
        if phase.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: phase.len() });
        }
        if !timestamp.is_finite() {
            return Err(Error::InvalidArgument("non-finite timestamp".into()));
        }
        if amplitude.iter().chain(&phase).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite channel entry".into()));
        }
        if amplitude.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidArgument("negative amplitude".into()));
        }
        Ok(Self { timestamp, n_rx, n_sub, amplitude, phase })
    }

    /// Builds a frame from row-major complex gains `H[i][j]`.
    pub fn from_complex(timestamp: f64, n_rx: usize, n_sub: usize, h: &[Complex64]) -> Result<Self> {
        let amplitude = h.iter().map(|c| c.norm()).collect();
        let phase = h.iter().map(|c| c.arg()).collect();
        Self::from_polar(timestamp, n_rx, n_sub, amplitude, phase)
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// Complex gain for antenna `i`, subcarrier `j`.
    pub fn h(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.n_sub + j;
        Complex64::from_polar(self.amplitude[k], self.phase[k])
    }
}

/// Row-major `|H|`: element `i * n_sub + j` is the amplitude of `H[i][j]`.
pub fn flatten_amplitude(frame: &CsiFrame) -> Vec<f64> {
    frame.amplitude.clone()
}

/// Time-ordered frames from one transceiver link.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    frames: Vec<CsiFrame>,
    sample_rate_hz: f64,
    link_id: u32,
}

impl Recording {
    /// Validates frame shapes and the sampling grid: consecutive timestamps
    /// must be increasing and within 10% of `1 / sample_rate_hz` apart.
    pub fn new(frames: Vec<CsiFrame>, sample_rate_hz: f64, link_id: u32) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!("bad sample rate {sample_rate_hz}")));
        }
        if let Some(first) = frames.first() {
            let shape = (first.n_rx, first.n_sub);
            if let Some(bad) = frames.iter().find(|f| (f.n_rx, f.n_sub) != shape) {
                return Err(Error::InvalidRecording(format!(
                    "frame at t={} has shape {}x{}, expected {}x{}",
                    bad.timestamp, bad.n_rx, bad.n_sub, shape.0, shape.1
                )));
            }
        }
        let period = 1.0 / sample_rate_hz;
        for pair in frames.windows(2) {
            let dt = pair[1].timestamp - pair[0].timestamp;
            if dt <= 0.0 || (dt - period).abs() > 0.1 * period {
                return Err(Error::InvalidRecording(format!(
                    "timestamp step {dt} at t={} is off the {sample_rate_hz} Hz grid",
                    pair[0].timestamp
                )));
            }
        }
        Ok(Self { frames, sample_rate_hz, link_id })
    }

    pub fn frames(&self) -> &[CsiFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn link_id(&self) -> u32 {
        self.link_id
    }

    /// Channel count `n_rx * n_sub`, or 0 for an empty recording.
    pub fn channels(&self) -> usize {
        self.frames.first().map_or(0, |f| f.n_rx * f.n_sub)
    }

    /// Frames × channels amplitude matrix.
    pub fn amplitude_matrix(&self) -> Array2<f64> {
        let d = self.channels();
        let mut out = Array2::zeros((self.frames.len(), d));
        for (mut row, frame) in out.rows_mut().into_iter().zip(&self.frames) {
            row.assign(&ndarray::ArrayView1::from(frame.amplitude()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Synthetic,
}

/// A fixed-length sequence with its label. Rows are time steps.
///
/// The same type carries raw amplitude windows (`T × n_rx·n_sub`) and, after
/// preprocessing, feature sequences (`S × k·F`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub values: Array2<f64>,
    pub label: ActivityLabel,
    pub origin: Origin,
}

impl LabeledWindow {
    pub fn real(values: Array2<f64>, label: ActivityLabel) -> Self {
        Self { values, label, origin: Origin::Real }
    }

    pub fn synthetic(values: Array2<f64>, label: ActivityLabel) -> Self {
        Self { values, label, origin: Origin::Synthetic }
    }

    pub fn steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }
}

/// Cut a recording into windows of `window_len` frames every `stride` frames.
///
/// Produces `floor((n_frames - window_len) / stride) + 1` windows.
pub fn segment(
    recording: &Recording,
    label: ActivityLabel,
    window_len: usize,
    stride: usize,
) -> Result<Vec<LabeledWindow>> {
    if window_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window_len and stride must be at least 1".into()));
    }
    let n = recording.len();
    if n < window_len {
        return Err(Error::EmptyRecording { frames: n, window_len });
    }
    let amps = recording.amplitude_matrix();
    let count = (n - window_len) / stride + 1;
    Ok((0..count)
        .map(|w| {
            let start = w * stride;
            LabeledWindow::real(amps.slice(s![start..start + window_len, ..]).to_owned(), label)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Windows with exactly one split tag each.
///
/// All windows share one shape, and the test split only ever holds real
/// windows: [`Dataset::push`] refuses anything else.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    windows: Vec<LabeledWindow>,
    splits: Vec<Split>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, window: LabeledWindow, split: Split) -> Result<()> {
        if split == Split::Test && window.origin == Origin::Synthetic {
            return Err(Error::SyntheticInTest);
        }
        if let Some(first) = self.windows.first() {
            if first.values.dim() != window.values.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "window is {:?}, dataset windows are {:?}",
                    window.values.dim(),
                    first.values.dim()
                )));
            }
        }
        self.windows.push(window);
        self.splits.push(split);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[LabeledWindow] {
        &self.windows
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LabeledWindow, Split)> + '_ {
        self.windows.iter().zip(self.splits.iter().copied())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledWindow> + '_ {
        self.iter().filter(move |(_, s)| *s == split).map(|(w, _)| w)
    }

    pub fn train(&self) -> impl Iterator<Item = &LabeledWindow> + '_ {
        self.split(Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &LabeledWindow> + '_ {
        self.split(Split::Test)
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    /// Window shape `(steps, width)` shared by every window, if any.
    pub fn window_shape(&self) -> Option<(usize, usize)> {
        self.windows.first().map(|w| w.values.dim())
    }

    pub fn class_counts(&self, split: Split) -> BTreeMap<ActivityLabel, usize> {
        let mut counts = BTreeMap::new();
        for w in self.split(split) {
            *counts.entry(w.label).or_insert(0) += 1;
        }
        counts
    }

    /// Tag a stratified `test_fraction` of each class as test, seeded.
    ///
    /// Per class, `round(test_fraction * n_c)` windows go to the test split,
    /// never all of them. Window order is preserved.
    pub fn stratified(windows: Vec<LabeledWindow>, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidArgument(format!(
                "test fraction {test_fraction} must lie in [0, 1)"
            )));
        }
        let mut by_class: BTreeMap<ActivityLabel, Vec<usize>> = BTreeMap::new();
        for (i, w) in windows.iter().enumerate() {
            if w.origin == Origin::Synthetic {
                return Err(Error::SyntheticInTest);
            }
            by_class.entry(w.label).or_default().push(i);
        }
        let mut splits = vec![Split::Train; windows.len()];
        let mut rng = rng::seeded(rng::derive_seed(seed, "test-split", 0));
        for idx in by_class.values_mut() {
            idx.shuffle(&mut rng);
            let n_test = ((test_fraction * idx.len() as f64).round() as usize).min(idx.len() - 1);
            for &i in &idx[..n_test] {
                splits[i] = Split::Test;
            }
        }
        let mut ds = Dataset::new();
        for (w, s) in windows.into_iter().zip(splits) {
            ds.push(w, s)?;
        }
        Ok(ds)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Config(format!("cannot serialize dataset: {e}")))?;
        crate::archive::write_atomic(path, text.as_bytes())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Dataset = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { line: e.line(), reason: e.to_string() })?;
        // Re-insert so a hand-edited file cannot smuggle synthetic test windows.
        let mut ds = Dataset::new();
        for (w, s) in raw.windows.into_iter().zip(raw.splits) {
            ds.push(w, s)?;
        }
        Ok(ds)
    }
}
