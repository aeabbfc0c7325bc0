//! PCA as a denoiser: the body-motion component is shared by every
//! subcarrier, so one principal component keeps it and drops most of the
//! independent per-channel noise.
//!
//! ```text
//! cargo run --release --example pca_denoise
//! ```

use csiaug::data_model::ActivityLabel;
use csiaug::ingest::{simulate, ScenarioSpec, DEFAULT_NOISE_STD};
use csiaug::preprocess::pca_fit;
use ndarray::Array2;

fn rms(a: &Array2<f64>) -> f64 {
    (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt()
}

fn main() -> csiaug::Result<()> {
    let mut spec = ScenarioSpec::new(ActivityLabel::Fall, 11);
    spec.duration_s = 2.0;
    let noisy = simulate(&spec)?.amplitude_matrix();
    spec.noise_std = 0.0;
    let clean = simulate(&spec)?.amplitude_matrix();

    let total: f64 = {
        let full = pca_fit(noisy.view(), noisy.ncols())?;
        full.explained_variance.sum()
    };
    println!("{} frames x {} channels, noise std {DEFAULT_NOISE_STD}", noisy.nrows(), noisy.ncols());
    println!("{:>3} {:>10} {:>12}", "k", "variance", "rms error");
    println!("{:>3} {:>10} {:>12.4}", "-", "-", rms(&(&noisy - &clean)));
    for k in [1, 2, 5, 10, 30] {
        let model = pca_fit(noisy.view(), k)?;
        let denoised = model.inverse_transform(model.transform(noisy.view())?.view())?;
        let kept = model.explained_variance.sum() / total;
        println!("{k:>3} {:>9.1}% {:>12.4}", 100.0 * kept, rms(&(&denoised - &clean)));
    }
    Ok(())
}
