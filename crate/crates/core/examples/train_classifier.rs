//! Train the LSTM classifier on simulated windows and report test metrics.
//!
//! ```text
//! cargo run --release --example train_classifier -- [seed]
//! ```

use csiaug::data_model::LabeledWindow;
use csiaug::experiment::{build_dataset, compute_metrics, FrontEnd};
use csiaug::ingest::simulate_bank;
use csiaug::nn::train_classifier_with;
use csiaug::rng::derive_seed;
use csiaug::RunConfig;

const CONFIG: &str = r#"
[windowing]
window_len = 250
stride = 250
[simulation]
per_class = 40
duration_s = 2.0
sample_rate_hz = 250.0
[pca]
k = 1
[features.stft]
win_len = 32
hop = 32
fft_len = 32
[classifier]
hidden_dim = 32
[classifier.train]
lr = 0.003
epochs = 15
batch_size = 16
"#;

fn main() -> csiaug::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed must be an integer"));
    let cfg = RunConfig::from_toml(CONFIG)?;
    let recordings = simulate_bank(&cfg.simulation, seed)?;
    let dataset = build_dataset(&recordings, &cfg.windowing, seed)?;
    let train: Vec<&LabeledWindow> = dataset.train().collect();
    let front = FrontEnd::fit(&train, &cfg.pipeline())?;
    let features = front.transform_dataset(&dataset)?;
    println!(
        "{} train / {} test windows, classifier input {:?}",
        features.count(csiaug::Split::Train),
        features.count(csiaug::Split::Test),
        features.window_shape().unwrap()
    );

    let mut train_cfg = cfg.classifier.train.clone();
    train_cfg.seed = derive_seed(seed, "classifier", 0);
    let trained = train_classifier_with(&features, &train_cfg, cfg.classifier.hidden_dim, |m| {
        println!("epoch {:>2} {:<5} loss {:.4} accuracy {:.3}", m.epoch, format!("{:?}", m.split).to_lowercase(), m.loss, m.accuracy);
    })?;
    let m = compute_metrics(&trained.params, &features)?;
    println!("test accuracy {:.4}, log loss {:.4}", m.accuracy, m.log_loss);
    Ok(())
}
