//! Simulate a small labeled recording bank, write it as canonical CSV and
//! show where each activity puts its energy.
//!
//! ```text
//! cargo run --release --example simulate_bank -- [out.csv]
//! ```

use csiaug::features::{stft, StftConfig};
use csiaug::ingest::{load_csv, simulate_bank, write_csv, MotionProfile, SimulationConfig};
use ndarray::Axis;

fn main() -> csiaug::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bank.csv".into());
    let cfg = SimulationConfig { per_class: 2, duration_s: 4.096, ..SimulationConfig::default() };
    let bank = simulate_bank(&cfg, 42)?;
    write_csv(out.as_ref(), &bank)?;
    let back = load_csv(out.as_ref())?;
    assert_eq!(back, bank, "CSV round trip");
    println!("wrote {} recordings to {out}", bank.len());

    // Spectrum of the channel-averaged amplitude over one long window.
    let n = 4096;
    let analysis = StftConfig { win_len: n, hop: n, fft_len: n, ..StftConfig::default() };
    println!("{:<9} {:>9} {:>11}", "label", "f0 (Hz)", "peak (Hz)");
    for rec in bank.iter().step_by(cfg.per_class) {
        let mean = rec.recording.amplitude_matrix().mean_axis(Axis(1)).unwrap();
        let dc = mean.mean().unwrap();
        let signal: Vec<f64> = mean.iter().map(|v| v - dc).collect();
        let sg = stft(&signal, &analysis, rec.recording.sample_rate_hz())?;
        println!(
            "{:<9} {:>9.2} {:>11.2}",
            rec.label.name(),
            MotionProfile::default_for(rec.label).dominant_freq_hz,
            sg.peak_bin() as f64 * sg.bin_hz,
        );
    }
    Ok(())
}
