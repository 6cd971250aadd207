//! `HSADLBL1` labeled-dataset files.
//!
//! ```text
//! "HSADLBL1"
//! version = 1, example count, d       u32 LE each
//! source tag, observation tag         u8 each
//! layer count                         u32
//! scorer                              u8 (0 = external, 1 = lexical)
//! tau                                 f64
//! per example: id length + UTF-8 id, label u8 (1 = hallucination), d × f64
//! ```

use std::path::Path;

use hsad_core::labeler::{LabelConfig, LabeledExample, Scorer};
use hsad_core::{FeatureSource, ObservationPoint};

use super::bytes::{read_file, write_file, Reader, Writer};
use super::features::FeatureSet;
use crate::error::{FormatError, Result};

pub const LABEL_MAGIC: &[u8; 8] = b"HSADLBL1";
pub const LABEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub features: FeatureSet,
    pub labels: Vec<bool>,
    pub label_config: LabelConfig,
}

impl LabelSet {
    pub fn from_examples(examples: &[LabeledExample], label_config: LabelConfig) -> Result<Self> {
        let features = FeatureSet::from_features(examples.iter().map(|e| (&e.example_id, &e.feature)))?;
        Ok(Self {
            features,
            labels: examples.iter().map(|e| e.label).collect(),
            label_config,
        })
    }

    pub fn examples(&self) -> Vec<LabeledExample> {
        self.features
            .rows
            .iter()
            .zip(&self.labels)
            .map(|((id, v), &label)| LabeledExample {
                example_id: id.clone(),
                feature: self.features.feature(v.clone()),
                label,
            })
            .collect()
    }
}

fn scorer_tag(s: Scorer) -> u8 {
    match s {
        Scorer::External => 0,
        Scorer::Lexical => 1,
    }
}

pub fn encode_labels(set: &LabelSet) -> Result<Vec<u8>> {
    let f = &set.features;
    if f.rows.len() != set.labels.len() {
        return Err(FormatError::ShapeMismatch("label count differs from feature count".into()));
    }
    let mut w = Writer::new(LABEL_MAGIC, LABEL_VERSION);
    w.len(f.rows.len())?;
    w.len(f.d)?;
    w.u8(f.source.to_tag());
    w.u8(f.observation.to_tag());
    w.u32(f.layer_count);
    w.u8(scorer_tag(set.label_config.scorer));
    w.f64(set.label_config.tau);
    for ((id, values), &label) in f.rows.iter().zip(&set.labels) {
        if values.len() != f.d {
            return Err(FormatError::ShapeMismatch(format!("feature `{id}` has the wrong width")));
        }
        w.str(id)?;
        w.u8(u8::from(label));
        w.f64s(values);
    }
    Ok(w.finish())
}

pub fn decode_labels(buf: &[u8]) -> Result<LabelSet> {
    let mut r = Reader::open(buf, LABEL_MAGIC, LABEL_VERSION)?;
    let count = r.u32()? as usize;
    let d = r.u32()? as usize;
    if d == 0 {
        return Err(FormatError::ShapeMismatch("feature width is zero".into()));
    }
    let tag = r.u8()?;
    let source = FeatureSource::from_tag(tag).ok_or_else(|| FormatError::ShapeMismatch(format!("unknown source tag {tag}")))?;
    let tag = r.u8()?;
    let observation =
        ObservationPoint::from_tag(tag).ok_or_else(|| FormatError::ShapeMismatch(format!("unknown observation tag {tag}")))?;
    let layer_count = r.u32()?;
    let scorer = match r.u8()? {
        0 => Scorer::External,
        1 => Scorer::Lexical,
        other => return Err(FormatError::ShapeMismatch(format!("unknown scorer tag {other}"))),
    };
    let tau = r.f64()?;
    let mut rows = Vec::with_capacity(count.min(1 << 16));
    let mut labels = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.str("example id")?;
        let label = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(FormatError::ShapeMismatch(format!("label byte {other} for `{id}`"))),
        };
        rows.push((id, r.f64s(d)?));
        labels.push(label);
    }
    r.finish()?;
    Ok(LabelSet {
        features: FeatureSet {
            source,
            observation,
            layer_count,
            d,
            rows,
        },
        labels,
        label_config: LabelConfig { tau, scorer },
    })
}

pub fn write_label_file(set: &LabelSet, path: &Path) -> Result<()> {
    write_file(path, &encode_labels(set)?)
}

pub fn read_label_file(path: &Path) -> Result<LabelSet> {
    decode_labels(&read_file(path)?)
}
