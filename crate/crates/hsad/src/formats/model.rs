//! `HSADMDL1` detector files.
//!
//! ```text
//! "HSADMDL1"
//! version = 1                                  u32
//! input_dim, hidden layer count                u32 each
//! hidden widths                                u32 each
//! dropout, lambda_l1, learning_rate            f64 each
//! epochs, batch_size                           u32 each
//! seed                                         u64
//! per hidden layer: weight (out × in), bias, BN scale, BN shift,
//!                   running mean, running variance        f64
//! output weight (last width), output bias                 f64
//! ```

use std::path::Path;

use hsad_core::detector::{DetectorConfig, DetectorModel, HiddenLayer};

use super::bytes::{read_file, write_file, Reader, Writer};
use crate::error::{FormatError, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"HSADMDL1";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &DetectorModel) -> Result<Vec<u8>> {
    model.validate()?;
    let cfg = &model.config;
    let mut w = Writer::new(MODEL_MAGIC, MODEL_VERSION);
    w.len(cfg.input_dim)?;
    w.len(cfg.hidden_dims.len())?;
    for &h in &cfg.hidden_dims {
        w.len(h)?;
    }
    w.f64(cfg.dropout_rate);
    w.f64(cfg.lambda_l1);
    w.f64(cfg.learning_rate);
    w.len(cfg.epochs)?;
    w.len(cfg.batch_size)?;
    w.u64(cfg.seed);
    for l in &model.hidden {
        for part in [&l.weight, &l.bias, &l.bn_scale, &l.bn_shift, &l.running_mean, &l.running_var] {
            w.f64s(part);
        }
    }
    w.f64s(&model.out_weight);
    w.f64(model.out_bias);
    Ok(w.finish())
}

pub fn decode_model(buf: &[u8]) -> Result<DetectorModel> {
    let mut r = Reader::open(buf, MODEL_MAGIC, MODEL_VERSION)?;
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    r.require(n_hidden.saturating_mul(4))?;
    let hidden_dims = (0..n_hidden).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let config = DetectorConfig {
        input_dim,
        hidden_dims,
        dropout_rate: r.f64()?,
        lambda_l1: r.f64()?,
        learning_rate: r.f64()?,
        epochs: r.u32()? as usize,
        batch_size: r.u32()? as usize,
        seed: r.u64()?,
    };
    config
        .validate_relaxed()
        .map_err(|e| FormatError::ShapeMismatch(format!("stored config is invalid: {e}")))?;
    let mut hidden = Vec::with_capacity(n_hidden);
    let mut in_dim = input_dim;
    for &out_dim in &config.hidden_dims {
        let weight_len = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| FormatError::ShapeMismatch("hidden layer too large".into()))?;
        hidden.push(HiddenLayer {
            in_dim,
            out_dim,
            weight: r.f64s(weight_len)?,
            bias: r.f64s(out_dim)?,
            bn_scale: r.f64s(out_dim)?,
            bn_shift: r.f64s(out_dim)?,
            running_mean: r.f64s(out_dim)?,
            running_var: r.f64s(out_dim)?,
        });
        in_dim = out_dim;
    }
    let out_weight = r.f64s(in_dim)?;
    let out_bias = r.f64()?;
    r.finish()?;
    let model = DetectorModel {
        hidden,
        out_weight,
        out_bias,
        config,
    };
    model.validate()?;
    Ok(model)
}

pub fn write_model_file(model: &DetectorModel, path: &Path) -> Result<()> {
    write_file(path, &encode_model(model)?)
}

pub fn read_model_file(path: &Path) -> Result<DetectorModel> {
    decode_model(&read_file(path)?)
}
