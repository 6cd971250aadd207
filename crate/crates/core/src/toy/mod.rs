//! Desk-scale trace generators: a seeded decoder-only transformer that
//! records real node vectors, and a controlled two-tone synthetic dataset.

mod dataset;
mod synthetic;
mod transformer;

pub use dataset::generate_toy_dataset;
pub use synthetic::{generate_synthetic_traces, SyntheticSpec, CLASS_A_SCORE, CLASS_B_SCORE};
pub use transformer::{run_toy_model, CaptureScope, KvCache, Nodes64, PositionRecord, ToyConfig, ToyModel, ToyRun};
