use std::path::Path;
use std::process::{Command, Output};

use csiaug::data_model::{Dataset, Origin, Split};

const RUN_TOML: &str = r#"
seed = 2
[windowing]
window_len = 100
stride = 100
test_fraction = 0.25
[simulation]
duration_s = 2.0
sample_rate_hz = 100.0
[pca]
k = 2
[features.stft]
win_len = 32
hop = 16
fft_len = 32
[classifier]
hidden_dim = 6
[classifier.train]
epochs = 2
batch_size = 8
[gan]
latent_dim = 4
generator_hidden = [8]
discriminator_hidden = [8]
steps = 20
batch_size = 4
[plan]
seeds = [1, 2]
"#;

fn csiaug(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csiaug")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = csiaug(dir, args);
    assert!(
        out.status.success(),
        "`{}` failed with {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), RUN_TOML).unwrap();
    ok(dir.path(), &["simulate", "--per-class", "4", "--seed", "5", "--out", "sim.csv", "--config", "run.toml"]);
    dir
}

#[test]
fn simulate_is_reproducible() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["simulate", "--per-class", "4", "--seed", "5", "--out", "again.csv", "--config", "run.toml"]);
    ok(d, &["simulate", "--per-class", "4", "--seed", "6", "--out", "other.csv", "--config", "run.toml"]);
    let a = std::fs::read(d.join("sim.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("again.csv")).unwrap());
    assert_ne!(a, std::fs::read(d.join("other.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("timestamp,link_id,label,a_0,"));
    // 7 classes, 4 recordings of 200 frames each, plus the header.
    assert_eq!(text.lines().count(), 7 * 4 * 200 + 1);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(csiaug(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(csiaug(dir.path(), &["simulate", "--out", "x.csv"]).status.code(), Some(1));
    assert_eq!(csiaug(dir.path(), &["generate", "--archive", "a", "--n", "many", "--seed", "1", "--out", "o"]).status.code(), Some(1));
    let version = ok(dir.path(), &["--version"]);
    assert!(String::from_utf8_lossy(&version.stdout).contains("archive format 1"));
}

#[test]
fn data_errors_exit_two() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "timestamp,link_id,label\n0,0,walk\n").unwrap();
    let out = csiaug(d, &["preprocess", "--dataset", "bad.csv", "--seed", "1", "--out", "pca.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!d.join("pca.bin").exists());

    let out = csiaug(d, &["evaluate", "--archive", "missing.bin", "--dataset", "sim.csv", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // A corrupted archive is refused.
    ok(d, &["preprocess", "--dataset", "sim.csv", "--seed", "1", "--out", "pca.bin", "--config", "run.toml"]);
    let mut bytes = std::fs::read(d.join("pca.bin")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(d.join("pca.bin"), bytes).unwrap();
    let out = csiaug(d, &["features", "--dataset", "sim.csv", "--archive", "pca.bin", "--seed", "1", "--out", "f.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn gan_generation_is_seeded_and_synthetic() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["train-gan", "--dataset", "sim.csv", "--class", "walk", "--seed", "3", "--out", "gan.bin", "--config", "run.toml"]);
    ok(d, &["generate", "--archive", "gan.bin", "--n", "6", "--seed", "9", "--out", "a.json"]);
    ok(d, &["generate", "--archive", "gan.bin", "--n", "6", "--seed", "9", "--out", "b.json"]);
    ok(d, &["generate", "--archive", "gan.bin", "--n", "6", "--seed", "10", "--out", "c.json"]);
    let a = std::fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.json")).unwrap());
    assert_ne!(a, std::fs::read(d.join("c.json")).unwrap());
    let ds = Dataset::load_json(&d.join("a.json")).unwrap();
    assert_eq!(ds.len(), 6);
    assert!(ds.iter().all(|(w, s)| w.origin == Origin::Synthetic && s == Split::Train));
    assert!(ds.windows().iter().all(|w| w.label == csiaug::ActivityLabel::Walk));
}

#[test]
fn classifier_round_trip_through_files() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["train-classifier", "--dataset", "sim.csv", "--seed", "3", "--out", "clf.bin", "--metrics", "epochs.csv", "--config", "run.toml"]);
    let curves = std::fs::read_to_string(d.join("epochs.csv")).unwrap();
    assert_eq!(curves.lines().next(), Some("epoch,split,loss,accuracy"));
    assert_eq!(curves.lines().count(), 1 + 2 * 2);
    ok(d, &["evaluate", "--archive", "clf.bin", "--dataset", "sim.csv", "--seed", "3", "--out", "eval.csv"]);
    let eval = std::fs::read_to_string(d.join("eval.csv")).unwrap();
    let mut lines = eval.lines();
    assert_eq!(lines.next(), Some("accuracy,log_loss"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((0.0..=1.0).contains(&values[0]) && values[1] > 0.0);
    // The evaluation matches the last test-split epoch of training.
    let last_test = curves.lines().rfind(|l| l.contains(",test,")).unwrap();
    let fields: Vec<&str> = last_test.split(',').collect();
    assert_eq!(fields[2].parse::<f64>().unwrap(), values[1]);
    assert_eq!(fields[3].parse::<f64>().unwrap(), values[0]);
}

#[test]
fn experiment_writes_one_line_per_row_and_seed() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["experiment", "--plan", "run.toml", "--dataset", "sim.csv", "--out", "report.csv", "--emit-plot-data"]);
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "n_real,n_synthetic,seed,accuracy,log_loss");
    assert_eq!(lines.len(), 1 + 3 * 2);
    let summary = std::fs::read_to_string(d.join("report_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
    assert!(d.join("report_curves.csv").exists());
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 5);
    }
    // Half-real and augmented rows share the real count; augmentation fills
    // up to the full row's count.
    let counts: Vec<(usize, usize)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<usize> = l.split(',').take(2).map(|v| v.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let (half, aug, full) = (counts[0], counts[2], counts[4]);
    assert_eq!(half.1, 0);
    assert_eq!(aug.0, half.0);
    assert_eq!(aug.0 + aug.1, full.0);
}
