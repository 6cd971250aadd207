//! Hallucination detection from the spectra of hidden-layer signals.
//!
//! A transformer's per-layer node vectors at one token position are stacked
//! into a `4·l × d` matrix; each column is read as a time series over network
//! depth. The strongest non-DC DFT amplitude of every column forms a feature
//! vector, which a small batch-normalized MLP maps to a hallucination
//! probability.
//!
//! This crate is `no_std` + `alloc`. File formats, the command line and other
//! I/O live in the `hsad` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod detector;
pub mod error;
pub mod fft;
pub mod labeler;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod signal;
pub mod spectral;
pub mod toy;
pub mod trace;

pub use error::{Error, Result, Stage};
pub use signal::{ObservationPoint, SignalMatrix};
pub use spectral::{FeatureSource, SpectralFeature};
pub use trace::{ActivationTrace, ExampleMeta, NodeVectors, PositionCapture, Role};
