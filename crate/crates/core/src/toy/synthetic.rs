use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{bail, Result};
use crate::trace::{ActivationTrace, ExampleMeta, NodeVectors, PositionCapture, Role};

/// Similarity score written for class-a (faithful) examples.
pub const CLASS_A_SCORE: f64 = 0.9;
/// Similarity score written for class-b (hallucinated) examples.
pub const CLASS_B_SCORE: f64 = 0.1;

/// Two-tone synthetic dataset: every hidden dimension of an answer-position
/// signal is a cosine at the class's frequency bin plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub class_a_bin: usize,
    pub class_b_bin: usize,
    pub noise_std: f64,
    pub n_per_class: usize,
    pub seed: u64,
    /// Question length.
    pub m: u32,
    /// Answer length.
    pub n: u32,
}

impl SyntheticSpec {
    /// Lowest non-DC bin against the Nyquist bin of a `4·l` signal.
    pub fn two_tone(l: u32) -> Self {
        Self {
            class_a_bin: 1,
            class_b_bin: 2 * l as usize,
            noise_std: 0.1,
            n_per_class: 100,
            seed: 0,
            m: 4,
            n: 4,
        }
    }

    pub fn validate(&self, l: u32) -> Result<()> {
        let max_bin = 2 * l as usize;
        for bin in [self.class_a_bin, self.class_b_bin] {
            if bin < 1 || bin > max_bin {
                bail!(InvalidConfig, "frequency bin {bin} outside 1..={max_bin}");
            }
        }
        if self.class_a_bin == self.class_b_bin {
            bail!(InvalidConfig, "class bins must differ");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            bail!(InvalidConfig, "noise_std must be finite and non-negative");
        }
        if self.n_per_class == 0 || self.m == 0 || self.n == 0 {
            bail!(InvalidConfig, "n_per_class, m and n must be at least 1");
        }
        Ok(())
    }
}

/// Writes the signal `signal[t]` of dimension `dim` into per-layer node
/// vectors so that row `t` of the stacked matrix reads it back: row `t` is
/// layer `l − t/4`, node `[h, mh, rh, ah][t % 4]`.
fn place_signal(layers: &mut [NodeVectors], dim: usize, signal: &[f64]) {
    let l = layers.len();
    for (t, &v) in signal.iter().enumerate() {
        let layer = &mut layers[l - 1 - t / 4];
        let slot = match t % 4 {
            0 => &mut layer.h,
            1 => &mut layer.mh,
            2 => &mut layer.rh,
            _ => &mut layer.ah,
        };
        slot[dim] = v as f32;
    }
}

fn tone_capture(
    token_index: u32,
    role: Role,
    bin: usize,
    l: usize,
    d: usize,
    noise: Option<&Normal<f64>>,
    rng: &mut ChaCha8Rng,
) -> PositionCapture {
    let len = 4 * l;
    let mut layers = alloc::vec![NodeVectors::splat(d, 0.0); l];
    let mut signal = alloc::vec![0.0; len];
    for dim in 0..d {
        for (t, s) in signal.iter_mut().enumerate() {
            *s = libm::cos(2.0 * PI * (bin * t) as f64 / len as f64);
            if let Some(dist) = noise {
                *s += dist.sample(rng);
            }
        }
        place_signal(&mut layers, dim, &signal);
    }
    PositionCapture {
        token_index,
        role,
        layers,
    }
}

/// Traces and labeled manifest for the two-tone dataset, classes interleaved
/// (a, b, a, b, …). Answer positions carry the class tone; question positions
/// carry a tone drawn from either class independently of the label.
pub fn generate_synthetic_traces(spec: &SyntheticSpec, d: u32, l: u32) -> Result<(Vec<ActivationTrace>, Vec<ExampleMeta>)> {
    spec.validate(l)?;
    if d == 0 {
        bail!(InvalidConfig, "d must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("validated std"));
    let (m, n) = (spec.m, spec.n);
    let mut traces = Vec::with_capacity(2 * spec.n_per_class);
    let mut metas = Vec::with_capacity(2 * spec.n_per_class);
    for k in 0..spec.n_per_class {
        for class_b in [false, true] {
            let class = if class_b { 'b' } else { 'a' };
            let id = alloc::format!("synth-{class}-{k:04}");
            let answer_bin = if class_b { spec.class_b_bin } else { spec.class_a_bin };
            let mut captures = Vec::with_capacity((m + n) as usize);
            for i in 0..m + n {
                let (role, bin) = if i < m {
                    let bin = if rng.random::<bool>() { spec.class_b_bin } else { spec.class_a_bin };
                    (Role::Question, bin)
                } else {
                    (Role::Answer, answer_bin)
                };
                captures.push(tone_capture(i, role, bin, l as usize, d as usize, noise.as_ref(), &mut rng));
            }
            traces.push(ActivationTrace {
                example_id: id.clone(),
                model_name: String::from("synthetic-two-tone"),
                l,
                d,
                m,
                n,
                captures,
            });
            let reference = alloc::format!("reference answer {k}");
            metas.push(ExampleMeta {
                example_id: id,
                question: alloc::format!("synthetic question {k}"),
                generated_answer: if class_b {
                    alloc::format!("unrelated output {}", k + 1)
                } else {
                    reference.clone()
                },
                reference_answer: reference,
                similarity_score: Some(if class_b { CLASS_B_SCORE } else { CLASS_A_SCORE }),
                label: None,
            });
        }
    }
    Ok((traces, metas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{build_signal_matrix, ObservationPoint};

    #[test]
    fn signal_round_trips_through_matrix() {
        let spec = SyntheticSpec {
            noise_std: 0.0,
            n_per_class: 1,
            ..SyntheticSpec::two_tone(3)
        };
        let (traces, metas) = generate_synthetic_traces(&spec, 2, 3).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(metas[0].similarity_score, Some(CLASS_A_SCORE));
        for tr in &traces {
            tr.validate().unwrap();
        }
        let t = build_signal_matrix(&traces[0], ObservationPoint::AEnd, &[1, 2, 3]).unwrap();
        for (row, v) in t.column(1).iter().enumerate() {
            let expected = libm::cos(2.0 * PI * row as f64 / 12.0) as f32;
            assert_eq!(*v, f64::from(expected));
        }
    }

    #[test]
    fn bins_validated() {
        let mut spec = SyntheticSpec::two_tone(4);
        spec.class_b_bin = 9;
        assert!(spec.validate(4).is_err());
        spec.class_b_bin = 1;
        assert!(spec.validate(4).is_err());
        spec.class_b_bin = 0;
        assert!(spec.validate(4).is_err());
    }

    #[test]
    fn seeded_generation_reproduces() {
        let spec = SyntheticSpec {
            n_per_class: 3,
            ..SyntheticSpec::two_tone(2)
        };
        assert_eq!(
            generate_synthetic_traces(&spec, 4, 2).unwrap(),
            generate_synthetic_traces(&spec, 4, 2).unwrap()
        );
    }
}
