use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transformer::{run_toy_model, CaptureScope, ToyConfig};
use crate::error::{bail, Result};
use crate::trace::{ActivationTrace, ExampleMeta};

fn tokens_text(tokens: &[u32]) -> String {
    let words: Vec<String> = tokens.iter().map(|t| alloc::format!("t{t}")).collect();
    words.join(" ")
}

/// Toy generations over seeded random prompts.
///
/// Even-numbered examples get their own generation as the reference answer,
/// odd-numbered ones a random token string, so a lexical scorer sees both
/// classes. No similarity score is written.
pub fn generate_toy_dataset(
    cfg: &ToyConfig,
    count: usize,
    prompt_len: usize,
    gen_len: usize,
    seed: u64,
    scope: CaptureScope,
) -> Result<(Vec<ActivationTrace>, Vec<ExampleMeta>)> {
    cfg.validate()?;
    if count == 0 || prompt_len == 0 {
        bail!(InvalidConfig, "count and prompt_len must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = cfg.vocab as u32;
    let mut traces = Vec::with_capacity(count);
    let mut metas = Vec::with_capacity(count);
    for k in 0..count {
        let id = alloc::format!("toy-{k:04}");
        let prompt: Vec<u32> = (0..prompt_len).map(|_| rng.random_range(0..vocab)).collect();
        let run = run_toy_model(cfg, &prompt, gen_len, &id, scope)?;
        let reference = if k % 2 == 0 {
            run.generated.clone()
        } else {
            (0..gen_len).map(|_| rng.random_range(0..vocab)).collect()
        };
        traces.push(run.trace);
        metas.push(ExampleMeta {
            example_id: id,
            question: tokens_text(&prompt),
            generated_answer: tokens_text(&run.generated),
            reference_answer: tokens_text(&reference),
            similarity_score: None,
            label: None,
        });
    }
    Ok((traces, metas))
}
