use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::signal::{select_observation_index, ObservationPoint};
use crate::trace::{ActivationTrace, NodeVectors, PositionCapture, Role};

const RMS_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyConfig {
    pub l: usize,
    pub d: usize,
    pub n_heads: usize,
    pub vocab: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            l: 4,
            d: 16,
            n_heads: 4,
            vocab: 64,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.d == 0 || self.n_heads == 0 || self.vocab == 0 {
            bail!(InvalidConfig, "toy model dimensions must all be at least 1");
        }
        if !self.d.is_multiple_of(self.n_heads) {
            bail!(InvalidConfig, "d = {} is not divisible by n_heads = {}", self.d, self.n_heads);
        }
        Ok(())
    }

    fn ffn_dim(&self) -> usize {
        4 * self.d
    }
}

/// Node vectors of one layer in full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes64 {
    pub ah: Vec<f64>,
    pub rh: Vec<f64>,
    pub mh: Vec<f64>,
    pub h: Vec<f64>,
}

impl Nodes64 {
    fn to_f32(&self) -> NodeVectors {
        let cast = |v: &[f64]| v.iter().map(|&x| x as f32).collect();
        NodeVectors::new(cast(&self.ah), cast(&self.rh), cast(&self.mh), cast(&self.h))
    }
}

/// Everything computed for one token position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionRecord {
    pub position: usize,
    pub token: u32,
    /// Embedding output, the residual input to layer 1.
    pub embedding: Vec<f64>,
    /// Layer 1 first.
    pub layers: Vec<Nodes64>,
    /// Attention weights `[layer][head][key position]`.
    pub attention: Vec<Vec<Vec<f64>>>,
}

struct Layer {
    attn_gain: Vec<f64>,
    wq: Vec<f64>,
    wk: Vec<f64>,
    wv: Vec<f64>,
    wo: Vec<f64>,
    mlp_gain: Vec<f64>,
    /// `ffn × d`
    w_up: Vec<f64>,
    /// `d × ffn`
    w_down: Vec<f64>,
}

/// Seeded decoder-only transformer with pre-norm RMS normalization.
pub struct ToyModel {
    cfg: ToyConfig,
    embed: Vec<f64>,
    layers: Vec<Layer>,
    final_gain: Vec<f64>,
    unembed: Vec<f64>,
}

/// Key/value cache: per layer, one key and one value row per processed position.
#[derive(Debug, Clone, Default)]
pub struct KvCache {
    keys: Vec<Vec<Vec<f64>>>,
    values: Vec<Vec<Vec<f64>>>,
}

impl KvCache {
    pub fn len(&self) -> usize {
        self.keys.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn matvec(w: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn rms_norm(x: &[f64], gain: &[f64]) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / libm::sqrt(ms + RMS_EPS);
    x.iter().zip(gain).map(|(v, g)| v * inv * g).collect()
}

fn silu(x: f64) -> f64 {
    x / (1.0 + libm::exp(-x))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl ToyModel {
    pub fn new(cfg: &ToyConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut uniform = |bound: f64, len: usize| -> Vec<f64> {
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            (0..len).map(|_| dist.sample(&mut rng)).collect()
        };
        let d = cfg.d;
        let ffn = cfg.ffn_dim();
        let scale = |fan_in: usize| 1.0 / libm::sqrt(fan_in as f64);
        let embed = uniform(1.0, cfg.vocab * d);
        let layers = (0..cfg.l)
            .map(|_| Layer {
                attn_gain: vec![1.0; d],
                wq: uniform(scale(d), d * d),
                wk: uniform(scale(d), d * d),
                wv: uniform(scale(d), d * d),
                wo: uniform(scale(d), d * d),
                mlp_gain: vec![1.0; d],
                w_up: uniform(scale(d), ffn * d),
                w_down: uniform(scale(ffn), d * ffn),
            })
            .collect();
        let unembed = uniform(scale(d), cfg.vocab * d);
        Ok(Self {
            cfg: cfg.clone(),
            embed,
            layers,
            final_gain: vec![1.0; d],
            unembed,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.cfg
    }

    fn embedding(&self, token: u32) -> Result<Vec<f64>> {
        let t = token as usize;
        if t >= self.cfg.vocab {
            return Err(Error::TokenOutOfVocab {
                token,
                vocab: self.cfg.vocab,
            });
        }
        Ok(self.embed[t * self.cfg.d..(t + 1) * self.cfg.d].to_vec())
    }

    /// Multi-head causal attention of `query` over `keys`/`values`, projected by `wo`.
    fn attend(&self, layer: &Layer, query: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.cfg.d;
        let hd = d / self.cfg.n_heads;
        let inv_sqrt = 1.0 / libm::sqrt(hd as f64);
        let mut mixed = vec![0.0; d];
        let mut weights = Vec::with_capacity(self.cfg.n_heads);
        for head in 0..self.cfg.n_heads {
            let span = head * hd..(head + 1) * hd;
            let scores: Vec<f64> = keys
                .iter()
                .map(|k| k[span.clone()].iter().zip(&query[span.clone()]).map(|(a, b)| a * b).sum::<f64>() * inv_sqrt)
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| libm::exp(s - max)).collect();
            let total: f64 = exps.iter().sum();
            let w: Vec<f64> = exps.iter().map(|e| e / total).collect();
            for (wi, v) in w.iter().zip(values) {
                for (m, x) in mixed[span.clone()].iter_mut().zip(&v[span.clone()]) {
                    *m += wi * x;
                }
            }
            weights.push(w);
        }
        (matvec(&layer.wo, &mixed, d), weights)
    }

    fn mlp(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        let up: Vec<f64> = matvec(&layer.w_up, x, self.cfg.ffn_dim()).into_iter().map(silu).collect();
        matvec(&layer.w_down, &up, self.cfg.d)
    }

    /// Runs one new token through every layer, appending to `cache`.
    pub fn step(&self, cache: &mut KvCache, token: u32) -> Result<PositionRecord> {
        let d = self.cfg.d;
        if cache.keys.is_empty() {
            cache.keys = vec![Vec::new(); self.cfg.l];
            cache.values = vec![Vec::new(); self.cfg.l];
        }
        let position = cache.len();
        let embedding = self.embedding(token)?;
        let mut x = embedding.clone();
        let mut layers = Vec::with_capacity(self.cfg.l);
        let mut attention = Vec::with_capacity(self.cfg.l);
        for (j, layer) in self.layers.iter().enumerate() {
            let normed = rms_norm(&x, &layer.attn_gain);
            let q = matvec(&layer.wq, &normed, d);
            cache.keys[j].push(matvec(&layer.wk, &normed, d));
            cache.values[j].push(matvec(&layer.wv, &normed, d));
            let (ah, w) = self.attend(layer, &q, &cache.keys[j], &cache.values[j]);
            let rh = add(&ah, &x);
            let mh = self.mlp(layer, &rms_norm(&rh, &layer.mlp_gain));
            let h = add(&rh, &mh);
            x = h.clone();
            layers.push(Nodes64 { ah, rh, mh, h });
            attention.push(w);
        }
        Ok(PositionRecord {
            position,
            token,
            embedding,
            layers,
            attention,
        })
    }

    /// Processes the whole sequence from scratch without a persistent cache;
    /// every layer recomputes keys and values for all positions.
    pub fn forward_full(&self, tokens: &[u32]) -> Result<Vec<PositionRecord>> {
        let d = self.cfg.d;
        let mut xs: Vec<Vec<f64>> = tokens.iter().map(|&t| self.embedding(t)).collect::<Result<_>>()?;
        let mut records: Vec<PositionRecord> = tokens
            .iter()
            .enumerate()
            .map(|(position, &token)| PositionRecord {
                position,
                token,
                embedding: xs[position].clone(),
                layers: Vec::with_capacity(self.cfg.l),
                attention: Vec::with_capacity(self.cfg.l),
            })
            .collect();
        for layer in &self.layers {
            let normed: Vec<Vec<f64>> = xs.iter().map(|x| rms_norm(x, &layer.attn_gain)).collect();
            let keys: Vec<Vec<f64>> = normed.iter().map(|n| matvec(&layer.wk, n, d)).collect();
            let values: Vec<Vec<f64>> = normed.iter().map(|n| matvec(&layer.wv, n, d)).collect();
            let mut next = Vec::with_capacity(xs.len());
            for (i, x) in xs.iter().enumerate() {
                let q = matvec(&layer.wq, &normed[i], d);
                let (ah, w) = self.attend(layer, &q, &keys[..=i], &values[..=i]);
                let rh = add(&ah, x);
                let mh = self.mlp(layer, &rms_norm(&rh, &layer.mlp_gain));
                let h = add(&rh, &mh);
                next.push(h.clone());
                records[i].layers.push(Nodes64 { ah, rh, mh, h });
                records[i].attention.push(w);
            }
            xs = next;
        }
        Ok(records)
    }

    /// Greedy next token from a final-layer hidden state (lowest id on ties).
    pub fn next_token(&self, h_last: &[f64]) -> u32 {
        let logits = matvec(&self.unembed, &rms_norm(h_last, &self.final_gain), self.cfg.vocab);
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best as u32
    }
}

/// Which token positions end up in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureScope {
    /// Every question and answer position.
    All,
    /// Only the answer positions (`gen_len` captures).
    Answer,
    /// The six observation points.
    ObservationPoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRun {
    pub generated: Vec<u32>,
    pub trace: ActivationTrace,
    /// Full-precision records for every processed position, in order.
    pub records: Vec<PositionRecord>,
}

/// Greedy generation of `gen_len` tokens after `prompt`, recording node
/// vectors with a key/value cache. The last generated token is also run
/// through the model so that its own position can be captured.
pub fn run_toy_model(
    cfg: &ToyConfig,
    prompt: &[u32],
    gen_len: usize,
    example_id: &str,
    scope: CaptureScope,
) -> Result<ToyRun> {
    if prompt.is_empty() {
        bail!(InvalidArgument, "prompt must contain at least one token");
    }
    if gen_len == 0 {
        bail!(InvalidArgument, "gen_len must be at least 1");
    }
    let model = ToyModel::new(cfg)?;
    let mut cache = KvCache::default();
    let mut records = Vec::with_capacity(prompt.len() + gen_len);
    for &t in prompt {
        records.push(model.step(&mut cache, t)?);
    }
    let mut generated = Vec::with_capacity(gen_len);
    for _ in 0..gen_len {
        let last = records.last().expect("prompt is non-empty");
        let next = model.next_token(&last.layers[cfg.l - 1].h);
        generated.push(next);
        records.push(model.step(&mut cache, next)?);
    }

    let m = prompt.len() as u32;
    let n = gen_len as u32;
    let wanted: Vec<u32> = match scope {
        CaptureScope::All => (0..m + n).collect(),
        CaptureScope::Answer => (m..m + n).collect(),
        CaptureScope::ObservationPoints => {
            let mut idx: Vec<u32> = ObservationPoint::ALL
                .iter()
                .map(|&p| select_observation_index(m, n, p))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        }
    };
    let captures = wanted
        .iter()
        .map(|&i| PositionCapture {
            token_index: i,
            role: if i < m { Role::Question } else { Role::Answer },
            layers: records[i as usize].layers.iter().map(Nodes64::to_f32).collect(),
        })
        .collect();
    let trace = ActivationTrace {
        example_id: String::from(example_id),
        model_name: alloc::format!("toy-l{}-d{}-h{}-v{}-s{}", cfg.l, cfg.d, cfg.n_heads, cfg.vocab, cfg.seed),
        l: cfg.l as u32,
        d: cfg.d as u32,
        m,
        n,
        captures,
    };
    trace.validate()?;
    Ok(ToyRun {
        generated,
        trace,
        records,
    })
}
