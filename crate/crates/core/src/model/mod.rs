//! Network definition, training, gradient checking and persistence.

pub mod arch;
pub mod gradcheck;
pub mod io;
pub mod network;
pub mod params;
pub mod train;

pub use arch::{ArchitectureSpec, LayerSpec};
pub use gradcheck::{grad_check, grad_check_network, BlockReport, GradCheckReport};
pub use io::{load_model, load_model_file, save_model, save_model_file};
pub use network::{argmax, Network, SampleGrads, Trace};
pub use params::{build_network, LayerParams, NetworkParams};
pub use train::{
    train, train_with, EpochStats, Precision, Sgd, StepDecay, TrainConfig, TrainHistory, TrainOutcome,
};
