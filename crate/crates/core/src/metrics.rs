//! AUROC and train/test splitting.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks (Mann–Whitney U).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        bail!(InvalidArgument, "score {i} is not finite");
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the positive rank sum, kept integral: a tie group spanning 1-based
    // ranks i..=j gets average rank (i + j) / 2.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let twice_rank = (start + 1 + end + 1) as u128;
        let group_pos = order[start..=end].iter().filter(|&&i| labels[i]).count() as u128;
        twice_rank_sum += twice_rank * group_pos;
        start = end + 1;
    }
    let p = positives as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * negatives as u128) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    /// 70/30 stratified, seed 0.
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

/// Seeded partition of `0..labels.len()` into sorted train and test indices.
///
/// Stratified splits put `round(fraction·count)` of each class in train,
/// clamped so both splits keep at least one example of each class.
pub fn split_indices(labels: &[bool], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        bail!(InvalidConfig, "train_fraction {} outside (0, 1)", spec.train_fraction);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut take = |mut idx: Vec<usize>, rng: &mut ChaCha8Rng, what: &str| -> Result<()> {
        if idx.len() < 2 {
            bail!(InvalidArgument, "{what} has {} examples; a split needs at least 2", idx.len());
        }
        idx.shuffle(rng);
        let k = libm::round(spec.train_fraction * idx.len() as f64) as usize;
        let k = k.clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
        Ok(())
    };
    if spec.stratified {
        let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        take(pos, &mut rng, "positive class")?;
        take(neg, &mut rng, "negative class")?;
    } else {
        take((0..labels.len()).collect(), &mut rng, "dataset")?;
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits owned items by [`split_indices`] over their labels.
pub fn split<T: Clone>(items: &[T], labels: &[bool], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: items.len(),
            found: labels.len(),
        });
    }
    let (tr, te) = split_indices(labels, spec)?;
    Ok((
        tr.iter().map(|&i| items[i].clone()).collect(),
        te.iter().map(|&i| items[i].clone()).collect(),
    ))
}
