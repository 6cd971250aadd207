//! Binary and text file formats. All integers and floats are little-endian;
//! every binary file starts with an 8-byte magic and a `u32` version.

pub(crate) mod bytes;
pub mod features;
pub mod labels;
pub mod manifest;
pub mod model;
pub mod trace_file;

pub use features::{read_feature_file, write_feature_file, FeatureSet};
pub use labels::{read_label_file, write_label_file, LabelSet};
pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use model::{read_model_file, write_model_file};
pub use trace_file::{read_trace_file, write_trace_file};
