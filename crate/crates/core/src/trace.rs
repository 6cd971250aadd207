//! Activation traces: the four node vectors recorded per layer at a token
//! position, grouped per example.
//!
//! Storage order is chronological: layers run 1 → l and nodes are kept in
//! computation order (`ah`, `rh`, `mh`, `h`). The reversed presentation used
//! for signal construction is applied by [`crate::signal`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Node vectors of one transformer layer at one token position.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVectors {
    /// Attention sub-layer output.
    pub ah: Vec<f32>,
    /// Residual stream after the attention sub-layer (`ah + h_prev`).
    pub rh: Vec<f32>,
    /// MLP sub-layer output.
    pub mh: Vec<f32>,
    /// Layer output (`rh + mh`).
    pub h: Vec<f32>,
}

impl NodeVectors {
    pub fn new(ah: Vec<f32>, rh: Vec<f32>, mh: Vec<f32>, h: Vec<f32>) -> Self {
        Self { ah, rh, mh, h }
    }

    /// All four vectors set to the same constant.
    pub fn splat(d: usize, value: f32) -> Self {
        Self::new(
            alloc::vec![value; d],
            alloc::vec![value; d],
            alloc::vec![value; d],
            alloc::vec![value; d],
        )
    }

    pub fn dim(&self) -> usize {
        self.ah.len()
    }

    /// Vectors in storage (computation) order.
    pub fn in_storage_order(&self) -> [&[f32]; 4] {
        [&self.ah, &self.rh, &self.mh, &self.h]
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            bail!(InvariantViolation, "hidden dimension must be positive");
        }
        for (name, v) in ["ah", "rh", "mh", "h"].iter().zip(self.in_storage_order()) {
            if v.len() != d {
                bail!(InvariantViolation, "{name} has length {}, expected {d}", v.len());
            }
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                bail!(InvariantViolation, "{name}[{pos}] is not finite");
            }
        }
        Ok(())
    }
}

/// Whether a token belongs to the question or the generated answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Question,
    Answer,
}

impl Role {
    pub fn to_byte(self) -> u8 {
        match self {
            Role::Question => 0,
            Role::Answer => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Role::Question),
            1 => Some(Role::Answer),
            _ => None,
        }
    }
}

/// All layers' node vectors at one token position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCapture {
    /// 0-based index over the concatenated question then answer tokens.
    pub token_index: u32,
    pub role: Role,
    /// Layer 1 first.
    pub layers: Vec<NodeVectors>,
}

/// Captured activations for one question/answer example.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub example_id: String,
    pub model_name: String,
    /// Number of layers.
    pub l: u32,
    /// Hidden dimension.
    pub d: u32,
    /// Question token count.
    pub m: u32,
    /// Answer token count.
    pub n: u32,
    pub captures: Vec<PositionCapture>,
}

impl ActivationTrace {
    pub fn validate(&self) -> Result<()> {
        let id = &self.example_id;
        if self.m < 1 || self.n < 1 || self.l < 1 || self.d < 1 {
            bail!(
                InvariantViolation,
                "trace `{id}`: l={}, d={}, m={}, n={} must all be at least 1",
                self.l,
                self.d,
                self.m,
                self.n
            );
        }
        let total = u64::from(self.m) + u64::from(self.n);
        let mut prev: Option<u32> = None;
        for cap in &self.captures {
            if prev.is_some_and(|p| cap.token_index <= p) {
                bail!(
                    InvariantViolation,
                    "trace `{id}`: captures not strictly sorted at token {}",
                    cap.token_index
                );
            }
            prev = Some(cap.token_index);
            if u64::from(cap.token_index) >= total {
                bail!(
                    InvariantViolation,
                    "trace `{id}`: token {} beyond m+n={total}",
                    cap.token_index
                );
            }
            let expected = if cap.token_index < self.m {
                Role::Question
            } else {
                Role::Answer
            };
            if cap.role != expected {
                bail!(
                    InvariantViolation,
                    "trace `{id}`: token {} has role {:?}, expected {expected:?}",
                    cap.token_index,
                    cap.role
                );
            }
            if cap.layers.len() != self.l as usize {
                bail!(
                    InvariantViolation,
                    "trace `{id}`: token {} has {} layers, header says {}",
                    cap.token_index,
                    cap.layers.len(),
                    self.l
                );
            }
            for (j, layer) in cap.layers.iter().enumerate() {
                layer.validate(self.d as usize).map_err(|e| {
                    crate::Error::InvariantViolation(alloc::format!(
                        "trace `{id}`: token {} layer {}: {}",
                        cap.token_index,
                        j + 1,
                        match e {
                            crate::Error::InvariantViolation(msg) => msg,
                            other => alloc::format!("{other}"),
                        }
                    ))
                })?;
            }
        }
        Ok(())
    }

    pub fn capture_at(&self, token_index: u32) -> Option<&PositionCapture> {
        self.captures
            .binary_search_by_key(&token_index, |c| c.token_index)
            .ok()
            .map(|i| &self.captures[i])
    }

    pub fn role_of(&self, token_index: u32) -> Role {
        if token_index < self.m {
            Role::Question
        } else {
            Role::Answer
        }
    }
}

/// Per-example text and scoring metadata carried in a manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExampleMeta {
    pub example_id: String,
    pub question: String,
    pub generated_answer: String,
    pub reference_answer: String,
    pub similarity_score: Option<f64>,
    pub label: Option<bool>,
}

impl ExampleMeta {
    pub fn validate(&self) -> Result<()> {
        if self.example_id.is_empty() {
            bail!(InvariantViolation, "example_id is empty");
        }
        if self.similarity_score.is_some_and(|s| !s.is_finite()) {
            bail!(
                InvariantViolation,
                "example `{}` has a non-finite similarity score",
                self.example_id
            );
        }
        Ok(())
    }
}

/// Checks that ids are unique across a manifest.
pub fn validate_manifest(metas: &[ExampleMeta]) -> Result<()> {
    let mut seen = alloc::collections::BTreeSet::new();
    for meta in metas {
        meta.validate()?;
        if !seen.insert(meta.example_id.as_str()) {
            bail!(InvariantViolation, "duplicate example_id `{}`", meta.example_id);
        }
    }
    Ok(())
}
