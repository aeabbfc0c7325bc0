//! Desk-scale CSI simulator.
//!
//! Instantiates `y = H(t) x + v` with a unit transmit symbol, so the received
//! amplitude on antenna `i`, subcarrier `j` is
//!
//! ```text
//! |H_ij(t)| = baseline_ij + amplitude_scale * s(t) + v_ij(t),   v ~ N(0, noise_std²)
//! ```
//!
//! where `s(t)` is a unit-RMS sum of tones drawn inside
//! `[f0 - spread/2, f0 + spread/2]`. Phases are zero; the pipeline only looks
//! at amplitudes. Each link gets its own baseline profile across subcarriers,
//! which is what makes two transceiver pairs see different patterns for the
//! same motion.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::csv::LabeledRecording;
use crate::data_model::{ActivityLabel, CsiFrame, Recording, DEFAULT_RX, DEFAULT_SUBCARRIERS};
use crate::error::{Error, Result};
use crate::rng;

const TONES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub dominant_freq_hz: f64,
    pub freq_spread_hz: f64,
    pub amplitude_scale: f64,
}

impl MotionProfile {
    /// Profile of `label` in the default scenario bank.
    ///
    /// Dominant frequencies are log-uniform over [0.5, 40] Hz, ordered by how
    /// vigorous the activity is: lying down is slowest, running fastest.
    pub fn default_for(label: ActivityLabel) -> Self {
        let (rank, scale) = match label {
            ActivityLabel::LieDown => (0, 0.8),
            ActivityLabel::SitDown => (1, 1.4),
            ActivityLabel::StandUp => (2, 1.1),
            ActivityLabel::PickUp => (3, 1.7),
            ActivityLabel::Walk => (4, 1.0),
            ActivityLabel::Fall => (5, 2.0),
            ActivityLabel::Run => (6, 1.6),
        };
        let f0 = 0.5 * 80f64.powf(f64::from(rank) / 6.0);
        Self { dominant_freq_hz: f0, freq_spread_hz: 0.2 * f0, amplitude_scale: scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: ActivityLabel,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub motion: MotionProfile,
    pub noise_std: f64,
    pub seed: u64,
    pub link_id: u32,
    pub n_rx: usize,
    pub n_sub: usize,
}

impl ScenarioSpec {
    pub fn new(label: ActivityLabel, seed: u64) -> Self {
        Self {
            label,
            duration_s: 1.0,
            sample_rate_hz: 1000.0,
            motion: MotionProfile::default_for(label),
            noise_std: DEFAULT_NOISE_STD,
            seed,
            link_id: 0,
            n_rx: DEFAULT_RX,
            n_sub: DEFAULT_SUBCARRIERS,
        }
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let m = &self.motion;
        let fail = |why: String| Err(Error::InvalidSpec(why));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return fail(format!("sample rate {} must be positive", self.sample_rate_hz));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.frames() == 0 {
            return fail(format!("duration {} s yields no frames", self.duration_s));
        }
        if !(m.dominant_freq_hz.is_finite() && m.dominant_freq_hz >= 0.0)
            || m.dominant_freq_hz >= self.sample_rate_hz / 2.0
        {
            return fail(format!(
                "dominant frequency {} Hz must lie in [0, {} Hz)",
                m.dominant_freq_hz,
                self.sample_rate_hz / 2.0
            ));
        }
        if !(m.freq_spread_hz.is_finite() && m.freq_spread_hz >= 0.0) {
            return fail(format!("frequency spread {} must be non-negative", m.freq_spread_hz));
        }
        if !(m.amplitude_scale.is_finite() && m.amplitude_scale >= 0.0) {
            return fail(format!("amplitude scale {} must be non-negative", m.amplitude_scale));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return fail(format!("noise std {} must be non-negative", self.noise_std));
        }
        if self.n_rx * self.n_sub == 0 {
            return fail("channel matrix must be non-empty".into());
        }
        Ok(())
    }
}

pub const DEFAULT_NOISE_STD: f64 = 1.0;

/// Static amplitude of antenna `i`, subcarrier `j` on `link` with no one moving.
pub fn baseline_amplitude(link: u32, i: usize, j: usize) -> f64 {
    let phase = 0.9 * f64::from(link) + 1.3 * i as f64;
    10.0 + 2.0 * (2.0 * PI * j as f64 / 30.0 + phase).cos()
}

/// Simulate one recording. Deterministic in `spec.seed`.
pub fn simulate(spec: &ScenarioSpec) -> Result<Recording> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let m = spec.motion;
    let nyquist = spec.sample_rate_hz / 2.0;
    let tones: Vec<(f64, f64)> = (0..TONES)
        .map(|_| {
            let f = m.dominant_freq_hz + m.freq_spread_hz * (rng.random::<f64>() - 0.5);
            let phase = 2.0 * PI * rng.random::<f64>();
            (f.clamp(0.0, nyquist), phase)
        })
        .collect();
    let norm = (2.0 / TONES as f64).sqrt();
    let d = spec.n_rx * spec.n_sub;
    let baseline: Vec<f64> = (0..spec.n_rx)
        .flat_map(|i| (0..spec.n_sub).map(move |j| baseline_amplitude(spec.link_id, i, j)))
        .collect();
    let noise = (spec.noise_std > 0.0)
        .then(|| Normal::new(0.0, spec.noise_std).expect("validated noise std"));

    let frames = (0..spec.frames())
        .map(|n| {
            let t = n as f64 / spec.sample_rate_hz;
            let s: f64 = norm * tones.iter().map(|&(f, p)| (2.0 * PI * f * t + p).cos()).sum::<f64>();
            let motion = m.amplitude_scale * s;
            let amplitude = baseline
                .iter()
                .map(|&b| {
                    let v = noise.map_or(0.0, |dist| dist.sample(&mut rng));
                    (b + motion + v).max(0.0)
                })
                .collect();
            CsiFrame::from_polar(t, spec.n_rx, spec.n_sub, amplitude, vec![0.0; d])
        })
        .collect::<Result<Vec<_>>>()?;
    Recording::new(frames, spec.sample_rate_hz, spec.link_id)
}

/// Settings for a labeled multi-class simulated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub classes: usize,
    pub per_class: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub noise_std: f64,
    /// Recordings cycle through this many transceiver links.
    pub links: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            classes: 7,
            per_class: 10,
            duration_s: 1.0,
            sample_rate_hz: 1000.0,
            noise_std: DEFAULT_NOISE_STD,
            links: 3,
        }
    }
}

/// `per_class` independent recordings for each of the first `classes`
/// labels, class-major. Recording `r` of a class sits on link `r % links`.
pub fn simulate_bank(cfg: &SimulationConfig, seed: u64) -> Result<Vec<LabeledRecording>> {
    if cfg.classes == 0 || cfg.classes > ActivityLabel::ALL.len() {
        return Err(Error::InvalidSpec(format!("classes must be in 1..=7, got {}", cfg.classes)));
    }
    if cfg.links == 0 {
        return Err(Error::InvalidSpec("at least one link is required".into()));
    }
    let mut out = Vec::with_capacity(cfg.classes * cfg.per_class);
    for &label in &ActivityLabel::ALL[..cfg.classes] {
        for r in 0..cfg.per_class {
            let spec = ScenarioSpec {
                duration_s: cfg.duration_s,
                sample_rate_hz: cfg.sample_rate_hz,
                noise_std: cfg.noise_std,
                seed: rng::derive_seed(seed, label.name(), r as u64),
                link_id: (r as u32) % cfg.links,
                ..ScenarioSpec::new(label, 0)
            };
            out.push(LabeledRecording { recording: simulate(&spec)?, label });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn still_and_noiseless_is_baseline() {
        let mut spec = ScenarioSpec::new(ActivityLabel::Walk, 4);
        spec.noise_std = 0.0;
        spec.motion.amplitude_scale = 0.0;
        spec.link_id = 2;
        let rec = simulate(&spec).unwrap();
        assert_eq!(rec.len(), 1000);
        for f in rec.frames() {
            for i in 0..3 {
                for j in 0..30 {
                    assert_eq!(f.amplitude()[i * 30 + j], baseline_amplitude(2, i, j));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_recording() {
        let spec = ScenarioSpec::new(ActivityLabel::Run, 11);
        assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
        let other = ScenarioSpec { seed: 12, ..spec.clone() };
        assert_ne!(simulate(&spec).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let base = ScenarioSpec::new(ActivityLabel::Fall, 0);
        let mut s = base.clone();
        s.motion.dominant_freq_hz = 500.0;
        assert!(matches!(simulate(&s), Err(Error::InvalidSpec(_))));
        let mut s = base.clone();
        s.noise_std = -1.0;
        assert!(matches!(simulate(&s), Err(Error::InvalidSpec(_))));
        let mut s = base;
        s.duration_s = 0.0;
        assert!(matches!(simulate(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn bank_profiles_are_distinct() {
        let profiles: Vec<_> = ActivityLabel::ALL.iter().map(|&l| MotionProfile::default_for(l)).collect();
        for (a, pa) in profiles.iter().enumerate() {
            assert!(pa.dominant_freq_hz >= 0.5 - 1e-12 && pa.dominant_freq_hz <= 40.0 + 1e-9);
            for pb in &profiles[a + 1..] {
                assert_ne!(pa.dominant_freq_hz, pb.dominant_freq_hz);
                assert_ne!(pa.amplitude_scale, pb.amplitude_scale);
            }
        }
        let run = MotionProfile::default_for(ActivityLabel::Run).dominant_freq_hz;
        assert!((run - 40.0).abs() < 1e-9);
    }

    #[test]
    fn bank_layout() {
        let cfg = SimulationConfig { per_class: 4, sample_rate_hz: 100.0, ..Default::default() };
        let bank = simulate_bank(&cfg, 1).unwrap();
        assert_eq!(bank.len(), 28);
        assert_eq!(bank[0].label, ActivityLabel::LieDown);
        assert_eq!(bank[27].label, ActivityLabel::PickUp);
        let links: Vec<u32> = bank[..4].iter().map(|r| r.recording.link_id()).collect();
        assert_eq!(links, vec![0, 1, 2, 0]);
    }
}
