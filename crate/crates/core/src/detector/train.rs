use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{BnStats, DetectorModel, PassOptions};
use crate::error::{Error, Result};
use crate::labeler::{ClassBalance, LabeledExample};
use crate::matrix::Matrix;

/// Trained model and the mean objective of every epoch, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: DetectorModel,
    pub loss_trace: Vec<f64>,
}

/// Mini-batch gradient descent with a fixed learning rate.
///
/// Shuffling and dropout draw from one stream seeded by the config seed. A
/// trailing batch of a single row is merged into the batch before it so that
/// batch statistics are always defined.
pub fn train(mut model: DetectorModel, x: &Matrix, y: &[bool]) -> Result<TrainOutcome> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if x.cols() != model.input_dim() {
        return Err(Error::WidthMismatch {
            expected: model.input_dim(),
            found: x.cols(),
        });
    }
    let balance = ClassBalance::of(y);
    if balance.positives < 2 || balance.negatives < 2 {
        return Err(Error::SingleClass {
            positives: balance.positives,
            negatives: balance.negatives,
        });
    }
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "feature row {} contains a non-finite value",
            i / x.cols()
        )));
    }

    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        if batches.len() > 1 && batches[batches.len() - 1].len() == 1 {
            batches.pop();
            let start = (batches.len() - 1) * cfg.batch_size;
            let last = batches.len() - 1;
            batches[last] = &order[start..];
        }
        let mut epoch_loss = 0.0;
        for idx in &batches {
            let xb = x.select_rows(idx);
            let yb: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
            let opts = PassOptions {
                bn: BnStats::Batch,
                dropout_seed: Some(rng.random()),
            };
            let (value, grad, cache) = model.loss_and_gradient(&xb, &yb, opts)?;
            let mut params = model.parameters();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            model.set_parameters(&params)?;
            model.update_running_stats(&cache.batch_stats);
            epoch_loss += value;
        }
        loss_trace.push(epoch_loss / batches.len() as f64);
    }
    Ok(TrainOutcome { model, loss_trace })
}

/// Stacks feature vectors into a matrix and collects labels.
pub fn examples_to_matrix(examples: &[LabeledExample]) -> Result<(Matrix, Vec<bool>)> {
    let rows: Vec<&[f64]> = examples.iter().map(|e| e.feature.f.as_slice()).collect();
    let x = Matrix::from_rows(&rows)?;
    Ok((x, examples.iter().map(|e| e.label).collect()))
}

/// [`train`] over labeled examples.
pub fn train_examples(model: DetectorModel, examples: &[LabeledExample]) -> Result<TrainOutcome> {
    let (x, y) = examples_to_matrix(examples)?;
    train(model, &x, &y)
}
