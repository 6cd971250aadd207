//! Spectral-feature hallucination classifier.
//!
//! Hidden stages are `ReLU(BN(W·x + b))` with dropout, compressing to 256
//! units; a single affine unit with a sigmoid gives the hallucination
//! probability. Training minimizes mean binary cross-entropy plus an L1
//! penalty on the first layer's weights.

mod config;
mod model;
mod train;

pub use config::{DetectorConfig, FINAL_HIDDEN};
pub use model::{
    loss, BnStats, DetectorModel, ForwardCache, HiddenLayer, Mode, PassOptions, BN_EPS, BN_MOMENTUM, LOSS_EPS,
};
pub use train::{examples_to_matrix, train, train_examples, TrainOutcome};
