//! Hidden-layer temporal signals.
//!
//! For one token position, the node vectors of the selected layers are stacked
//! into a `4·l′ × d` matrix whose column `i` is the temporal signal of hidden
//! dimension `i`. Layers appear in descending id order and, within a layer,
//! rows run `h, mh, rh, ah`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::trace::ActivationTrace;

/// Token position at which hidden states are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObservationPoint {
    QStart,
    QMid,
    QEnd,
    AStart,
    AMid,
    AEnd,
}

impl ObservationPoint {
    pub const ALL: [ObservationPoint; 6] = [
        ObservationPoint::QStart,
        ObservationPoint::QMid,
        ObservationPoint::QEnd,
        ObservationPoint::AStart,
        ObservationPoint::AMid,
        ObservationPoint::AEnd,
    ];

    /// Tag as used in file headers.
    pub fn to_tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    /// Kebab-case name, e.g. `a-end`.
    pub fn name(self) -> &'static str {
        match self {
            ObservationPoint::QStart => "q-start",
            ObservationPoint::QMid => "q-mid",
            ObservationPoint::QEnd => "q-end",
            ObservationPoint::AStart => "a-start",
            ObservationPoint::AMid => "a-mid",
            ObservationPoint::AEnd => "a-end",
        }
    }
}

impl fmt::Display for ObservationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObservationPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-").to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown observation point `{s}`")))
    }
}

/// Token index observed for `point` in a sequence of `m` question tokens
/// followed by `n` answer tokens.
pub fn select_observation_index(m: u32, n: u32, point: ObservationPoint) -> u32 {
    debug_assert!(m >= 1 && n >= 1);
    match point {
        ObservationPoint::QStart => 0,
        ObservationPoint::QMid => (m - 1) / 2,
        ObservationPoint::QEnd => m - 1,
        ObservationPoint::AStart => m,
        ObservationPoint::AMid => m + (n - 1) / 2,
        ObservationPoint::AEnd => m + n - 1,
    }
}

/// Stacked node vectors at one observation point.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    /// Row-major, `rows × d`.
    values: Vec<f64>,
    rows: usize,
    d: usize,
    /// Layers in the order their blocks appear (descending).
    pub layer_ids: Vec<u32>,
    pub observation: ObservationPoint,
}

impl SignalMatrix {
    /// Wraps raw row-major values; checks the row-count law and finiteness.
    pub fn from_rows(
        values: Vec<f64>,
        d: usize,
        layer_ids: Vec<u32>,
        observation: ObservationPoint,
    ) -> Result<Self> {
        let rows = 4 * layer_ids.len();
        if d == 0 || layer_ids.is_empty() {
            bail!(InvalidArgument, "signal matrix needs d ≥ 1 and at least one layer");
        }
        if values.len() != rows * d {
            return Err(Error::LengthMismatch {
                expected: rows * d,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(InvariantViolation, "signal matrix contains a non-finite entry");
        }
        Ok(Self {
            values,
            rows,
            d,
            layer_ids,
            observation,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.d + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.d..(row + 1) * self.d]
    }

    /// Temporal signal of hidden dimension `col`.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `c` to every entry.
    pub fn offset(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Negates every entry.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out
    }
}

/// Builds the signal matrix for `trace` at `point` using `layer_ids`
/// (1-based; any order, duplicates rejected).
pub fn build_signal_matrix(
    trace: &ActivationTrace,
    point: ObservationPoint,
    layer_ids: &[u32],
) -> Result<SignalMatrix> {
    if layer_ids.is_empty() {
        bail!(InvalidArgument, "layer_ids must be non-empty");
    }
    let mut ordered: Vec<u32> = layer_ids.to_vec();
    ordered.sort_unstable_by(|a, b| b.cmp(a));
    if ordered.windows(2).any(|w| w[0] == w[1]) {
        bail!(InvalidArgument, "layer_ids contains duplicates");
    }
    if let Some(&bad) = ordered.iter().find(|&&j| j == 0 || j > trace.l) {
        bail!(InvalidArgument, "layer id {bad} outside 1..={}", trace.l);
    }

    let token_index = select_observation_index(trace.m, trace.n, point);
    let capture = trace
        .capture_at(token_index)
        .ok_or_else(|| Error::ObservationNotCaptured {
            example_id: trace.example_id.clone(),
            token_index,
        })?;

    let d = trace.d as usize;
    let mut values = Vec::with_capacity(4 * ordered.len() * d);
    for &j in &ordered {
        let layer = capture.layers.get(j as usize - 1).ok_or_else(|| {
            Error::InvariantViolation(alloc::format!(
                "trace `{}` is missing layer {j}",
                trace.example_id
            ))
        })?;
        for node in [&layer.h, &layer.mh, &layer.rh, &layer.ah] {
            if node.len() != d {
                return Err(Error::WidthMismatch {
                    expected: d,
                    found: node.len(),
                });
            }
            values.extend(node.iter().map(|&v| f64::from(v)));
        }
    }
    SignalMatrix::from_rows(values, d, ordered, point)
}

/// How layers are chosen for a signal matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSelection {
    All,
    /// `count` distinct layers drawn uniformly at random.
    Random { count: u32, seed: u64 },
    /// `count` evenly spaced layers, always including the last.
    Strided { count: u32 },
    Explicit(Vec<u32>),
}

impl LayerSelection {
    /// Resolves to sorted ascending layer ids for a model with `l` layers.
    pub fn resolve(&self, l: u32) -> Result<Vec<u32>> {
        match self {
            LayerSelection::All => Ok((1..=l).collect()),
            LayerSelection::Random { count, seed } => subsample_layers(l, *count, *seed),
            LayerSelection::Strided { count } => strided_layers(l, *count),
            LayerSelection::Explicit(ids) => {
                let mut ids = ids.clone();
                ids.sort_unstable();
                ids.dedup();
                if ids.is_empty() || ids[0] == 0 || ids[ids.len() - 1] > l {
                    bail!(InvalidArgument, "explicit layers must be non-empty and within 1..={l}");
                }
                Ok(ids)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LayerSelection::All => "all".into(),
            LayerSelection::Random { count, seed } => alloc::format!("random:{count}:{seed}"),
            LayerSelection::Strided { count } => alloc::format!("strided:{count}"),
            LayerSelection::Explicit(ids) => {
                let parts: Vec<String> = ids.iter().map(|i| alloc::format!("{i}")).collect();
                parts.join(",")
            }
        }
    }
}

/// `count` distinct layer ids in `1..=l`, uniformly at random, sorted ascending.
pub fn subsample_layers(l: u32, count: u32, seed: u64) -> Result<Vec<u32>> {
    if count < 1 || count > l {
        bail!(InvalidArgument, "layer count {count} outside 1..={l}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, l as usize, count as usize)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// `count` evenly spaced layer ids: `ceil(k·l/count)` for `k = 1..=count`.
pub fn strided_layers(l: u32, count: u32) -> Result<Vec<u32>> {
    if count < 1 || count > l {
        bail!(InvalidArgument, "layer count {count} outside 1..={l}");
    }
    let (l, count) = (u64::from(l), u64::from(count));
    Ok((1..=count).map(|k| (k * l).div_ceil(count) as u32).collect())
}
