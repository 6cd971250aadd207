//! `HSADFEA1` feature files.
//!
//! ```text
//! "HSADFEA1"
//! version = 1, example count, d       u32 LE each
//! source tag                          u8 (0 = fft, 1 = time-max)
//! observation tag                     u8 (0..=5: q-start … a-end)
//! layer count                         u32
//! per example: id length + UTF-8 id, d × f64 LE
//! ```

use std::path::Path;

use hsad_core::{FeatureSource, ObservationPoint, SpectralFeature};

use super::bytes::{read_file, write_file, Reader, Writer};
use crate::error::{FormatError, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"HSADFEA1";
pub const FEATURE_VERSION: u32 = 1;

/// Features sharing one source, observation point and layer count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub source: FeatureSource,
    pub observation: ObservationPoint,
    pub layer_count: u32,
    pub d: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl FeatureSet {
    /// Collects per-example features; all must agree on their metadata.
    pub fn from_features<'a>(items: impl IntoIterator<Item = (&'a String, &'a SpectralFeature)>) -> Result<Self> {
        let mut iter = items.into_iter().peekable();
        let Some((_, first)) = iter.peek() else {
            return Err(FormatError::ShapeMismatch("feature set is empty".into()));
        };
        let (source, observation, layer_count, d) = (first.source, first.observation, first.layer_count, first.dim());
        let mut rows = Vec::new();
        for (id, f) in iter {
            if f.source != source || f.observation != observation || f.layer_count != layer_count || f.dim() != d {
                return Err(FormatError::ShapeMismatch(format!("feature `{id}` disagrees with the set header")));
            }
            rows.push((id.clone(), f.f.clone()));
        }
        Ok(Self {
            source,
            observation,
            layer_count,
            d,
            rows,
        })
    }

    pub fn feature(&self, values: Vec<f64>) -> SpectralFeature {
        SpectralFeature {
            f: values,
            source: self.source,
            observation: self.observation,
            layer_count: self.layer_count,
            peak_bins: None,
        }
    }

    /// Id-keyed features, the shape the labeler consumes.
    pub fn to_map(&self) -> std::collections::BTreeMap<String, SpectralFeature> {
        self.rows.iter().map(|(id, v)| (id.clone(), self.feature(v.clone()))).collect()
    }
}

pub fn encode_features(set: &FeatureSet) -> Result<Vec<u8>> {
    let mut w = Writer::new(FEATURE_MAGIC, FEATURE_VERSION);
    w.len(set.rows.len())?;
    w.len(set.d)?;
    w.u8(set.source.to_tag());
    w.u8(set.observation.to_tag());
    w.u32(set.layer_count);
    for (id, values) in &set.rows {
        if values.len() != set.d {
            return Err(FormatError::ShapeMismatch(format!("feature `{id}` has {} values, expected {}", values.len(), set.d)));
        }
        w.str(id)?;
        w.f64s(values);
    }
    Ok(w.finish())
}

pub fn decode_features(buf: &[u8]) -> Result<FeatureSet> {
    let mut r = Reader::open(buf, FEATURE_MAGIC, FEATURE_VERSION)?;
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
    let mut rows = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.str("example id")?;
        let values = r.f64s(d)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(hsad_core::Error::InvariantViolation(format!("feature `{id}` is not finite")).into());
        }
        rows.push((id, values));
    }
    r.finish()?;
    Ok(FeatureSet {
        source,
        observation,
        layer_count,
        d,
        rows,
    })
}

pub fn write_feature_file(set: &FeatureSet, path: &Path) -> Result<()> {
    write_file(path, &encode_features(set)?)
}

pub fn read_feature_file(path: &Path) -> Result<FeatureSet> {
    decode_features(&read_file(path)?)
}
