//! `HSADTRC1` activation-trace files.
//!
//! ```text
//! "HSADTRC1"                          8 bytes
//! version = 1, trace count            u32 LE each
//! per trace:
//!   id length, UTF-8 id               u32 + bytes
//!   model-name length, UTF-8 name     u32 + bytes
//!   l, d, m, n, capture count         u32 each
//!   per capture:
//!     token_index                     u32
//!     role                            u8 (0 = question, 1 = answer)
//!     l blocks of 4·d f32 LE          ah, rh, mh, h; layer 1 first
//! ```

use std::path::Path;

use hsad_core::{ActivationTrace, NodeVectors, PositionCapture, Role};

use super::bytes::{read_file, write_file, Reader, Writer};
use crate::error::{FormatError, Result};

pub const TRACE_MAGIC: &[u8; 8] = b"HSADTRC1";
pub const TRACE_VERSION: u32 = 1;

/// Serializes validated traces. Nothing is produced if any trace is invalid.
pub fn encode_traces(traces: &[ActivationTrace]) -> Result<Vec<u8>> {
    for t in traces {
        t.validate()?;
    }
    let mut w = Writer::new(TRACE_MAGIC, TRACE_VERSION);
    w.len(traces.len())?;
    for t in traces {
        w.str(&t.example_id)?;
        w.str(&t.model_name)?;
        for v in [t.l, t.d, t.m, t.n] {
            w.u32(v);
        }
        w.len(t.captures.len())?;
        for c in &t.captures {
            w.u32(c.token_index);
            w.u8(c.role.to_byte());
            for layer in &c.layers {
                for node in layer.in_storage_order() {
                    w.f32s(node);
                }
            }
        }
    }
    Ok(w.finish())
}

pub fn decode_traces(buf: &[u8]) -> Result<Vec<ActivationTrace>> {
    let mut r = Reader::open(buf, TRACE_MAGIC, TRACE_VERSION)?;
    let count = r.u32()? as usize;
    let mut traces = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let example_id = r.str("example id")?;
        let model_name = r.str("model name")?;
        let (l, d, m, n) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        if l == 0 || d == 0 {
            return Err(FormatError::ShapeMismatch(format!(
                "trace `{example_id}` declares l={l}, d={d}"
            )));
        }
        let n_captures = r.u32()? as usize;
        let block = 4 * d as usize;
        // token index + role + floats
        let per_capture = 5 + (l as usize) * block * 4;
        r.require(n_captures.saturating_mul(per_capture))?;
        let mut captures = Vec::with_capacity(n_captures);
        for _ in 0..n_captures {
            let token_index = r.u32()?;
            let role_byte = r.u8()?;
            let role = Role::from_byte(role_byte).ok_or_else(|| {
                FormatError::ShapeMismatch(format!("trace `{example_id}`: unknown role byte {role_byte}"))
            })?;
            let mut layers = Vec::with_capacity(l as usize);
            for _ in 0..l {
                let d = d as usize;
                let ah = r.f32s(d)?;
                let rh = r.f32s(d)?;
                let mh = r.f32s(d)?;
                let h = r.f32s(d)?;
                layers.push(NodeVectors::new(ah, rh, mh, h));
            }
            captures.push(PositionCapture {
                token_index,
                role,
                layers,
            });
        }
        let trace = ActivationTrace {
            example_id,
            model_name,
            l,
            d,
            m,
            n,
            captures,
        };
        trace.validate()?;
        traces.push(trace);
    }
    r.finish()?;
    Ok(traces)
}

pub fn write_trace_file(traces: &[ActivationTrace], path: &Path) -> Result<()> {
    let bytes = encode_traces(traces)?;
    write_file(path, &bytes)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<ActivationTrace>> {
    decode_traces(&read_file(path)?)
}
