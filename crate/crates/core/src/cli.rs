//! Command-line frontend. [`cmd_dispatch`] is the whole program; the binary
//! only forwards `argv` and the exit code.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
//!
//! Dataset files ending in `.json` hold windowed datasets with their splits;
//! any other extension is read as the canonical per-frame CSV, which is
//! windowed and split using the run config and `--seed`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::archive::{self, ModelArchive, NamedArray, Section, FORMAT_VERSION};
use crate::config::RunConfig;
use crate::data_model::{ActivityLabel, Dataset, LabeledWindow, Split, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::experiment::{build_dataset, compute_metrics, run_plan_with, subsample_per_class, synthesize, train_class_gans, FrontEnd};
use crate::gan::{convergence_report, GanDomain};
use crate::ingest::{load_csv, load_mapped, simulate_bank, write_csv};
use crate::nn::{train_classifier_with, EpochMetrics};
use crate::rng::{derive_seed, PRNG_FAMILY};

#[derive(Parser, Debug)]
#[command(name = "csiaug", about = "CSI activity recognition with GAN augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run config (TOML). Defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a CSV in a mapped layout (see `[ingest]` in the config) to the canonical CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a simulated recording bank as canonical CSV.
    Simulate {
        #[arg(long, default_value_t = NUM_CLASSES)]
        classes: usize,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit PCA (and feature scaling) on the train split and store it in an archive.
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Turn a dataset into classifier inputs using a fitted archive.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the front end and the LSTM classifier on the train split.
    TrainClassifier {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss/accuracy CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train per-class GANs on a random fraction of each class's train windows.
    TrainGan {
        #[arg(long)]
        dataset: PathBuf,
        /// Class id, name, or `all`.
        #[arg(long, default_value = "all")]
        class: String,
        #[arg(long, default_value_t = 0.5)]
        real_fraction: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample synthetic windows from the GANs in an archive.
    Generate {
        #[arg(long)]
        archive: PathBuf,
        /// Windows per class.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy and log loss of an archived classifier on the test split.
    Evaluate {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every plan row for every plan seed and write the report CSVs.
    Experiment {
        /// Run config whose `[plan]` lists rows and seeds.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Overrides the config seed used for the test split.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-epoch curves next to the report.
        #[arg(long)]
        emit_plot_data: bool,
    },
}

fn version_text() -> String {
    format!("{} (archive format {FORMAT_VERSION}, prng {PRNG_FAMILY})", env!("CARGO_PKG_VERSION"))
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn cmd_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().version(version_text()).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same definition");
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn load_dataset(path: &Path, cfg: &RunConfig) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "json") {
        Dataset::load_json(path)
    } else {
        build_dataset(&load_csv(path)?, &cfg.windowing, derive_seed(cfg.seed, "split", 0))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    archive::write_atomic(path, text.as_bytes())
}

fn parse_classes(spec: &str) -> Result<Vec<ActivityLabel>> {
    if spec == "all" {
        return Ok(ActivityLabel::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<ActivityLabel>().map_err(|_| Error::InvalidArgument(format!("unknown class `{s}`"))))
        .collect()
}

fn embedded_config(archive: &ModelArchive) -> Result<RunConfig> {
    RunConfig::from_toml(&archive.config)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, out, common } => {
            let cfg = load_config(common.config.as_deref())?;
            let recs = load_mapped(&input, &cfg.ingest)?;
            write_csv(&out, &recs)?;
            println!("{} recordings, {} frames", recs.len(), recs.iter().map(|r| r.recording.len()).sum::<usize>());
        }
        Command::Simulate { classes, per_class, seed, out, common } => {
            let mut cfg = load_config(common.config.as_deref())?;
            cfg.simulation.classes = classes;
            if let Some(n) = per_class {
                cfg.simulation.per_class = n;
            }
            let recs = simulate_bank(&cfg.simulation, seed)?;
            write_csv(&out, &recs)?;
            println!("{} recordings", recs.len());
        }
        Command::Preprocess { dataset, seed, out, common } => {
            let mut cfg = load_config(common.config.as_deref())?;
            cfg.seed = seed;
            let ds = load_dataset(&dataset, &cfg)?;
            let train: Vec<&LabeledWindow> = ds.train().collect();
            let front = FrontEnd::fit(&train, &cfg.pipeline())?;
            for (b, m) in front.projector.blocks.iter().enumerate() {
                let ev: Vec<String> = m.explained_variance.iter().map(|v| format!("{v:.6}")).collect();
                println!("block {b}: explained variance {}", ev.join(" "));
            }
            let mut a = ModelArchive::new(cfg.to_toml());
            archive::front_end_sections(&front).into_iter().for_each(|s| a.put(s));
            a.save(&out)?;
        }
        Command::Features { dataset, archive: path, seed, out } => {
            let a = ModelArchive::load(&path)?;
            let mut cfg = embedded_config(&a)?;
            cfg.seed = seed;
            let front = archive::front_end_from_archive(&a, cfg.features.clone())?;
            let ds = load_dataset(&dataset, &cfg)?;
            let feats = front.transform_dataset(&ds)?;
            feats.save_json(&out)?;
            println!("{} windows of shape {:?}", feats.len(), feats.window_shape().unwrap_or((0, 0)));
        }
        Command::TrainClassifier { dataset, seed, out, metrics, common } => {
            let mut cfg = load_config(common.config.as_deref())?;
            cfg.seed = seed;
            let ds = load_dataset(&dataset, &cfg)?;
            let train: Vec<&LabeledWindow> = ds.train().collect();
            let front = FrontEnd::fit(&train, &cfg.pipeline())?;
            let feats = front.transform_dataset(&ds)?;
            let mut tc = cfg.classifier.train.clone();
            tc.seed = derive_seed(seed, "classifier", 0);
            let mut stdout = std::io::stdout();
            let trained = train_classifier_with(&feats, &tc, cfg.classifier.hidden_dim, |m| {
                let _ = writeln!(stdout, "{}", m.csv_line());
            })?;
            if let Some(p) = metrics {
                let mut text = format!("{}\n", EpochMetrics::CSV_HEADER);
                trained.metrics.iter().for_each(|m| text.push_str(&format!("{}\n", m.csv_line())));
                write_text(&p, &text)?;
            }
            let mut a = ModelArchive::new(cfg.to_toml());
            archive::front_end_sections(&front).into_iter().for_each(|s| a.put(s));
            a.put(archive::classifier_section(&trained.params));
            a.save(&out)?;
        }
        Command::TrainGan { dataset, class, real_fraction, seed, out, common } => {
            let mut cfg = load_config(common.config.as_deref())?;
            cfg.seed = seed;
            let classes = parse_classes(&class)?;
            let ds = load_dataset(&dataset, &cfg)?;
            let sub = subsample_per_class(&ds, real_fraction, derive_seed(seed, "subsample", 0))?;
            let real: Vec<&LabeledWindow> = sub.train().collect();
            let front = FrontEnd::fit(&real, &cfg.pipeline())?;
            let feats = front.transform_dataset(&sub)?;
            let source: Vec<&LabeledWindow> = match cfg.gan.domain {
                GanDomain::Features => feats.train().collect(),
                GanDomain::Raw => real.clone(),
            };
            let shape = source.first().ok_or(Error::EmptyDataset("no training windows"))?.values.dim();
            let runs = train_class_gans(&source, &classes, &cfg.gan, derive_seed(seed, "gan", 0))?;
            let mut a = ModelArchive::new(cfg.to_toml());
            archive::front_end_sections(&front).into_iter().for_each(|s| a.put(s));
            a.put(Section {
                name: "gan_meta".into(),
                arrays: vec![NamedArray::scalar("rows", shape.0 as f64), NamedArray::scalar("cols", shape.1 as f64)],
            });
            for run in &runs {
                let rep = convergence_report(&run.trace)?;
                let band = rep.epochs_to_band.map_or("never".to_string(), |e| e.to_string());
                println!(
                    "class {}: final D(real) {:.4}, in band from epoch {band}",
                    run.pair.class_id, rep.final_d_real_mean
                );
                a.put(archive::gan_section(&run.pair));
            }
            a.save(&out)?;
        }
        Command::Generate { archive: path, n, seed, out } => {
            let a = ModelArchive::load(&path)?;
            let cfg = embedded_config(&a)?;
            let front = archive::front_end_from_archive(&a, cfg.features.clone())?;
            let meta = a.require("gan_meta")?;
            let shape = (meta.get("rows")?.data[0] as usize, meta.get("cols")?.data[0] as usize);
            let pairs = archive::gans(&a)?;
            if pairs.is_empty() {
                return Err(Error::Archive("archive holds no GANs".into()));
            }
            let mut ds = Dataset::new();
            for pair in &pairs {
                for w in synthesize(pair, n, seed, cfg.gan.domain, shape, &front)? {
                    ds.push(w, Split::Train)?;
                }
            }
            ds.save_json(&out)?;
            println!("{} synthetic windows", ds.len());
        }
        Command::Evaluate { archive: path, dataset, seed, out } => {
            let a = ModelArchive::load(&path)?;
            let mut cfg = embedded_config(&a)?;
            cfg.seed = seed;
            let front = archive::front_end_from_archive(&a, cfg.features.clone())?;
            let params = archive::classifier_from_section(a.require("classifier")?)?;
            let feats = front.transform_dataset(&load_dataset(&dataset, &cfg)?)?;
            let m = compute_metrics(&params, &feats)?;
            let text = format!("accuracy,log_loss\n{},{}\n", m.accuracy, m.log_loss);
            print!("{text}");
            if let Some(p) = out {
                write_text(&p, &text)?;
            }
        }
        Command::Experiment { plan, dataset, out, seed, emit_plot_data } => {
            let mut cfg = RunConfig::load(&plan)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let ds = load_dataset(&dataset, &cfg)?;
            let report = run_plan_with(&cfg.experiment_plan(), &ds, |r| {
                println!("row {} {}", r.row, r.metrics.csv_line());
            })?;
            write_text(&out, &report.report_csv())?;
            write_text(&sibling(&out, "summary"), &report.summary_csv())?;
            if emit_plot_data {
                write_text(&sibling(&out, "curves"), &report.curves_csv())?;
            }
            print!("{}", report.summary_csv());
        }
    }
    Ok(())
}

/// `dir/report.csv` → `dir/report_<suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
    let ext = path.extension().map_or("csv".into(), |e| e.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}
