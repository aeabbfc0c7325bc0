//! Minimal neural-network core shared by the classifier and the GANs:
//! a reverse-mode autodiff tape, dense and LSTM layers, the log loss,
//! optimizers and a finite-difference gradient checker.

pub mod classifier;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod optim;

pub use classifier::{
    evaluate_windows, train_classifier, train_classifier_with, ClassifierParams, EpochMetrics,
    TrainConfig, TrainedClassifier,
};
pub use graph::{softmax_rows, Gradients, Graph, NodeId, Tensor};
pub use layers::{lstm_forward, Dense, LstmParams, Mlp, Parameters};
pub use loss::{argmax_rows, cross_entropy, one_hot};
pub use optim::{clip_global_norm, global_norm, Optimizer, OptimizerKind};
