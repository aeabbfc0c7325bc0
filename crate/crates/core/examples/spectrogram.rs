//! The classifier's view of one window: PCA components turned into
//! log-magnitude spectrogram rows.
//!
//! ```text
//! cargo run --release --example spectrogram -- [label]
//! ```

use csiaug::data_model::{segment, ActivityLabel};
use csiaug::features::{feature_sequence, StftConfig};
use csiaug::ingest::{simulate, ScenarioSpec};
use csiaug::preprocess::{PcaConfig, Projector};

fn main() -> csiaug::Result<()> {
    let label = match std::env::args().nth(1) {
        Some(s) => s.parse::<ActivityLabel>()?,
        None => ActivityLabel::Walk,
    };
    let mut spec = ScenarioSpec::new(label, 3);
    spec.duration_s = 2.0;
    let rec = simulate(&spec)?;
    let windows = segment(&rec, label, 1000, 500)?;

    let projector = Projector::fit(&windows, &PcaConfig { k: 2, ..PcaConfig::default() })?;
    let components = projector.transform(windows[0].values.view())?;
    let cfg = StftConfig::default();
    let features = feature_sequence(components.view(), &cfg)?;
    let bins = cfg.bins();
    let bin_hz = spec.sample_rate_hz / cfg.fft_len as f64;
    println!(
        "{label}: window {:?} -> components {:?} -> features {:?} ({bins} bins of {bin_hz:.2} Hz per component)",
        windows[0].values.dim(),
        components.dim(),
        features.dim()
    );

    // Strongest bins of the first component in each segment, drawn as bars.
    let shown = 16;
    for (s, row) in features.rows().into_iter().enumerate() {
        let first = row.slice(ndarray::s![..shown]);
        let top = first.iter().copied().fold(f64::MIN, f64::max);
        let bar: String = first
            .iter()
            .map(|&v| match v / top {
                r if r > 0.8 => '#',
                r if r > 0.5 => '+',
                r if r > 0.25 => '.',
                _ => ' ',
            })
            .collect();
        println!("segment {s}: |{bar}|");
    }
    println!("           0 Hz{:>width$}", format!("{:.0} Hz", shown as f64 * bin_hz), width = shown - 1);
    Ok(())
}
