//! Train a GAN on samples from Normal(3, 0.5) and compare the moments of
//! what it generates.
//!
//! ```text
//! cargo run --release --example gan_1d -- [seed]
//! ```

use csiaug::gan::{convergence_report, gan_generate, gan_train, GanConfig};
use ndarray::Array2;
use rand_distr::{Distribution, Normal};

fn main() -> csiaug::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed must be an integer"));
    let mut rng = csiaug::rng::seeded(seed);
    let target = Normal::new(3.0, 0.5).unwrap();
    let real = Array2::from_shape_fn((1000, 1), |_| target.sample(&mut rng));

    let cfg = GanConfig::default();
    let started = std::time::Instant::now();
    let run = gan_train(&real, &cfg, 0, seed)?;
    let report = convergence_report(&run.trace)?;

    let fake = gan_generate(&run.pair, 5000, seed)?;
    let mean = fake.mean().unwrap();
    let std = fake.std(0.0);
    println!("trained {} steps in {:.1?}", cfg.steps, started.elapsed());
    println!("generated mean {mean:.4} (target 3), std {std:.4} (target 0.5)");
    println!("final mean D(real) {:.4}", report.final_d_real_mean);
    match report.epochs_to_band {
        Some(e) => println!("D(real) settled in [0.4, 0.6] from epoch {e}"),
        None => println!("D(real) never settled in [0.4, 0.6]"),
    }
    Ok(())
}
