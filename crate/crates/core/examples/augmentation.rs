//! The three-row augmentation experiment on simulated recordings: half the
//! real training windows, that half completed with GAN windows, and all real
//! windows, each over several seeds.
//!
//! ```text
//! cargo run --release --example augmentation -- [config.toml]
//! ```
//!
//! Without an argument a small configuration is used that finishes in a few
//! minutes on one core.

use csiaug::experiment::{build_dataset, run_plan_with};
use csiaug::ingest::simulate_bank;
use csiaug::RunConfig;

const DESK: &str = include_str!("desk.toml");

fn main() -> csiaug::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::from_toml(DESK)?,
    };
    let recordings = simulate_bank(&cfg.simulation, cfg.seed)?;
    let dataset = build_dataset(&recordings, &cfg.windowing, cfg.seed)?;
    println!(
        "{} train / {} test windows of shape {:?}",
        dataset.count(csiaug::Split::Train),
        dataset.count(csiaug::Split::Test),
        dataset.window_shape().unwrap()
    );

    let started = std::time::Instant::now();
    let report = run_plan_with(&cfg.experiment_plan(), &dataset, |r| {
        let m = &r.metrics;
        println!(
            "row {} seed {:>2}: {:>4} real + {:>4} synthetic  accuracy {:.4}  log loss {:.4}  [{:.0?}]",
            r.row, m.seed, m.n_real, m.n_synthetic, m.accuracy, m.log_loss, started.elapsed()
        );
    })?;
    println!("\nmedians over seeds");
    for s in &report.summary {
        println!(
            "real {:>4} synthetic {:>4}  accuracy {:.4}  log loss {:.4}",
            s.n_real, s.n_synthetic, s.accuracy, s.log_loss
        );
    }
    Ok(())
}
