//! Save a trained classifier and a GAN to one archive, reload them and
//! check that nothing changed. Also shows a corrupted file being refused.
//!
//! ```text
//! cargo run --release --example archive_roundtrip
//! ```

use csiaug::archive::{classifier_from_section, classifier_section, gan_section, gans, ModelArchive};
use csiaug::data_model::{ActivityLabel, Dataset, LabeledWindow, Split};
use csiaug::gan::{gan_generate, gan_train, GanConfig};
use csiaug::nn::{train_classifier, TrainConfig};
use ndarray::Array2;

fn main() -> csiaug::Result<()> {
    let mut ds = Dataset::new();
    for i in 0..40 {
        let label = ActivityLabel::ALL[i % 7];
        let values = Array2::from_shape_fn((4, 3), |(t, c)| ((label.id() + 1) * (t + c + 1)) as f64 / 10.0 + i as f64 / 400.0);
        ds.push(LabeledWindow::real(values, label), Split::Train)?;
    }
    let cfg = TrainConfig { epochs: 10, batch_size: 8, seed: 5, ..TrainConfig::default() };
    let trained = train_classifier(&ds, &cfg, 8)?;

    let walk: Vec<f64> = ds.windows().iter().filter(|w| w.label == ActivityLabel::Walk).flat_map(|w| w.values.iter().copied()).collect();
    let real = Array2::from_shape_vec((walk.len() / 12, 12), walk).expect("whole windows");
    let gan = gan_train(&real, &GanConfig { steps: 50, batch_size: 4, ..GanConfig::default() }, ActivityLabel::Walk.id(), 5)?;

    let mut archive = ModelArchive::new("# example archive\n".into());
    archive.put(classifier_section(&trained.params));
    archive.put(gan_section(&gan.pair));
    let path = std::env::temp_dir().join(format!("csiaug-example-{}.bin", std::process::id()));
    archive.save(&path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("saved {} sections, {size} bytes, to {}", archive.sections.len(), path.display());

    let loaded = ModelArchive::load(&path)?;
    let params = classifier_from_section(loaded.require("classifier")?)?;
    let pairs = gans(&loaded)?;
    println!("classifier identical: {}", params == trained.params);
    println!("GAN for class {} identical: {}", pairs[0].class_id, pairs[0] == gan.pair);
    println!("same samples: {}", gan_generate(&pairs[0], 3, 1)? == gan_generate(&gan.pair, 3, 1)?);

    let mut bytes = std::fs::read(&path).expect("archive was just written");
    let last = bytes.len() - 40;
    bytes[last] ^= 1;
    match ModelArchive::from_bytes(&bytes) {
        Err(e) => println!("flipped one bit: {e}"),
        Ok(_) => println!("flipped one bit: not detected"),
    }
    let _ = std::fs::remove_file(&path);
    Ok(())
}
