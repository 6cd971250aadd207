//! File formats, run manifests, a parallel ablation runner and the `hsad`
//! command line on top of [`hsad_core`].

pub mod cli;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod run_manifest;

pub use error::{FormatError, Result};
