//! Human activity recognition from WiFi channel state information, with
//! per-class GAN data augmentation.
//!
//! The pipeline runs raw CSI amplitude windows through PCA, a short-time
//! Fourier transform and an LSTM classifier. One GAN per activity class
//! learns the feature windows of that class and fills in training data.
//! [`experiment`] compares half the real data, half plus synthetic, and all of
//! it on one frozen test split.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! - `simulate_bank`: simulated recordings and their spectra
//! - `pca_denoise`: PCA on a noisy recording
//! - `spectrogram`: STFT features of one window
//! - `train_classifier`: LSTM training on simulated windows
//! - `gan_1d`: a GAN matching a 1-D Gaussian
//! - `augmentation`: the three-row augmentation experiment
//! - `archive_roundtrip`: saving and reloading trained models

pub mod archive;
pub mod cli;
pub mod config;
pub mod data_model;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gan;
pub mod ingest;
pub mod nn;
pub mod preprocess;
pub mod rng;

pub use config::RunConfig;
pub use data_model::{ActivityLabel, CsiFrame, Dataset, LabeledWindow, Origin, Recording, Split};
pub use error::{Error, Result};
