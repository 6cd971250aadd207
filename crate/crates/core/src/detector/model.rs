use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::DetectorConfig;
use crate::error::{Error, Result};
use crate::matrix::{affine, axpy, Matrix};

/// Added to the variance inside the batch-norm denominator.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the current batch in the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.1;
/// Predictions are clamped to `[LOSS_EPS, 1 - LOSS_EPS]` inside the loss.
pub const LOSS_EPS: f64 = 1e-7;

/// Fully connected layer followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim × in_dim`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl HiddenLayer {
    fn param_count(&self) -> usize {
        self.weight.len() + 3 * self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub hidden: Vec<HiddenLayer>,
    /// Final classification weights, one per unit of the last hidden layer.
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
    pub config: DetectorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics (with running-stat update) and dropout.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

/// Which statistics batch normalization divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnStats {
    Batch,
    Running,
}

/// Knobs for a single forward/backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOptions {
    pub bn: BnStats,
    /// Seed for dropout masks; `None` disables dropout.
    pub dropout_seed: Option<u64>,
}

impl PassOptions {
    pub const EVAL: Self = Self {
        bn: BnStats::Running,
        dropout_seed: None,
    };
}

struct LayerCache {
    input: Matrix,
    inv_std: Vec<f64>,
    normalized: Matrix,
    pre_act: Matrix,
    /// Dropout scale per unit (`0` or `1/(1-p)`); empty when dropout is off.
    dropout: Vec<f64>,
}

/// Intermediates of one forward pass, reused by backpropagation.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    last_hidden: Matrix,
    /// Per-layer batch mean and variance (biased), when batch stats were used.
    pub batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    };
    // keep the probability inside the open unit interval
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl DetectorModel {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases, identity batch norm.
    pub fn init(cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::init_unchecked(cfg))
    }

    /// Initializes without the final-width rule. For gradient checks.
    #[doc(hidden)]
    pub fn init_relaxed(cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate_relaxed()?;
        Ok(Self::init_unchecked(cfg))
    }

    fn init_unchecked(cfg: &DetectorConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut uniform = |fan_in: usize, len: usize| -> Vec<f64> {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            (0..len).map(|_| dist.sample(&mut rng)).collect()
        };
        let mut hidden = Vec::with_capacity(cfg.hidden_dims.len());
        let mut in_dim = cfg.input_dim;
        for &out_dim in &cfg.hidden_dims {
            hidden.push(HiddenLayer {
                in_dim,
                out_dim,
                weight: uniform(in_dim, in_dim * out_dim),
                bias: vec![0.0; out_dim],
                bn_scale: vec![1.0; out_dim],
                bn_shift: vec![0.0; out_dim],
                running_mean: vec![0.0; out_dim],
                running_var: vec![1.0; out_dim],
            });
            in_dim = out_dim;
        }
        Self {
            hidden,
            out_weight: uniform(in_dim, in_dim),
            out_bias: 0.0,
            config: cfg.clone(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    /// First hidden layer's weight matrix, the target of the L1 penalty.
    pub fn first_weight(&self) -> &[f64] {
        &self.hidden[0].weight
    }

    /// Checks shapes, positivity of running variances and finiteness.
    pub fn validate(&self) -> Result<()> {
        let mut in_dim = self.config.input_dim;
        if self.hidden.len() != self.config.hidden_dims.len() {
            return Err(Error::InvariantViolation("hidden layer count differs from config".into()));
        }
        for (layer, &out_dim) in self.hidden.iter().zip(&self.config.hidden_dims) {
            let ok = layer.in_dim == in_dim
                && layer.out_dim == out_dim
                && layer.weight.len() == in_dim * out_dim
                && [&layer.bias, &layer.bn_scale, &layer.bn_shift, &layer.running_mean, &layer.running_var]
                    .iter()
                    .all(|v| v.len() == out_dim);
            if !ok {
                return Err(Error::InvariantViolation("hidden layer shapes do not chain".into()));
            }
            if layer.running_var.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvariantViolation("running variance must be positive".into()));
            }
            in_dim = out_dim;
        }
        if self.out_weight.len() != in_dim {
            return Err(Error::InvariantViolation("output layer width does not chain".into()));
        }
        if !self.parameters().iter().all(|v| v.is_finite())
            || !self
                .hidden
                .iter()
                .all(|l| l.running_mean.iter().chain(&l.running_var).all(|v| v.is_finite()))
        {
            return Err(Error::InvariantViolation("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    /// Trainable parameters flattened: per hidden layer weight, bias, BN
    /// scale, BN shift; then output weight and bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.hidden {
            p.extend_from_slice(&l.weight);
            p.extend_from_slice(&l.bias);
            p.extend_from_slice(&l.bn_scale);
            p.extend_from_slice(&l.bn_shift);
        }
        p.extend_from_slice(&self.out_weight);
        p.push(self.out_bias);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                found: p.len(),
            });
        }
        let mut rest = p;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        for l in &mut self.hidden {
            take(&mut l.weight);
            take(&mut l.bias);
            take(&mut l.bn_scale);
            take(&mut l.bn_shift);
        }
        take(&mut self.out_weight);
        let mut last = [0.0];
        take(&mut last);
        self.out_bias = last[0];
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(HiddenLayer::param_count).sum::<usize>() + self.out_weight.len() + 1
    }

    fn check_width(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::WidthMismatch {
                expected: self.config.input_dim,
                found: batch.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass under explicit options; does not touch running stats.
    pub fn forward_with(&self, batch: &Matrix, opts: PassOptions) -> Result<ForwardCache> {
        self.check_width(batch)?;
        if opts.bn == BnStats::Batch && batch.rows() < 2 {
            return Err(Error::InvalidArgument("batch statistics need at least 2 rows".into()));
        }
        let rows = batch.rows();
        let p = self.config.dropout_rate;
        let mut dropout_rng = opts.dropout_seed.filter(|_| p > 0.0).map(ChaCha8Rng::seed_from_u64);

        let mut x = batch.clone();
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut batch_stats = Vec::new();
        for layer in &self.hidden {
            let z = affine(&x, &layer.weight, &layer.bias);
            let width = layer.out_dim;
            let (mean, var) = match opts.bn {
                BnStats::Batch => {
                    let (m, v) = column_moments(&z);
                    batch_stats.push((m.clone(), v.clone()));
                    (m, v)
                }
                BnStats::Running => (layer.running_mean.clone(), layer.running_var.clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + BN_EPS)).collect();
            let mut centered = z;
            let mut normalized = Matrix::zeros(rows, width);
            let mut pre_act = Matrix::zeros(rows, width);
            for r in 0..rows {
                let c = centered.row_mut(r);
                for k in 0..width {
                    c[k] -= mean[k];
                }
                let c = centered.row(r).to_vec();
                let nrow = normalized.row_mut(r);
                for k in 0..width {
                    nrow[k] = c[k] * inv_std[k];
                }
                let nrow = normalized.row(r).to_vec();
                let prow = pre_act.row_mut(r);
                for k in 0..width {
                    prow[k] = layer.bn_scale[k] * nrow[k] + layer.bn_shift[k];
                }
            }
            let dropout = match dropout_rng.as_mut() {
                Some(rng) => (0..rows * width)
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect(),
                None => Vec::new(),
            };
            let mut out = Matrix::zeros(rows, width);
            for (i, (o, &a)) in out.as_mut_slice().iter_mut().zip(pre_act.as_slice()).enumerate() {
                let relu = a.max(0.0);
                *o = if dropout.is_empty() { relu } else { relu * dropout[i] };
            }
            layers.push(LayerCache {
                input: x,
                inv_std,
                normalized,
                pre_act,
                dropout,
            });
            x = out;
        }
        let logits: Vec<f64> = (0..rows)
            .map(|r| crate::matrix::dot(x.row(r), &self.out_weight) + self.out_bias)
            .collect();
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(ForwardCache {
            layers,
            last_hidden: x,
            batch_stats,
            logits,
            probs,
        })
    }

    /// Hallucination probabilities for a batch. Train mode uses batch
    /// statistics, updates the running statistics and applies dropout seeded
    /// by `seed`; eval mode is deterministic and leaves the model unchanged.
    pub fn forward(&mut self, batch: &Matrix, mode: Mode, seed: u64) -> Result<Vec<f64>> {
        match mode {
            Mode::Eval => Ok(self.forward_with(batch, PassOptions::EVAL)?.probs),
            Mode::Train => {
                let cache = self.forward_with(
                    batch,
                    PassOptions {
                        bn: BnStats::Batch,
                        dropout_seed: Some(seed),
                    },
                )?;
                self.update_running_stats(&cache.batch_stats);
                Ok(cache.probs)
            }
        }
    }

    pub(crate) fn update_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) {
        for (layer, (mean, var)) in self.hidden.iter_mut().zip(stats) {
            for k in 0..layer.out_dim {
                layer.running_mean[k] = (1.0 - BN_MOMENTUM) * layer.running_mean[k] + BN_MOMENTUM * mean[k];
                layer.running_var[k] = (1.0 - BN_MOMENTUM) * layer.running_var[k] + BN_MOMENTUM * var[k];
            }
        }
    }

    /// Eval-mode probability for one feature vector.
    pub fn predict(&self, feature: &[f64]) -> Result<f64> {
        let batch = Matrix::from_vec(1, feature.len(), feature.to_vec())?;
        Ok(self.forward_with(&batch, PassOptions::EVAL)?.probs[0])
    }

    /// Eval-mode probabilities for every row.
    pub fn predict_batch(&self, batch: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward_with(batch, PassOptions::EVAL)?.probs)
    }

    /// Objective value and its gradient with respect to [`parameters`](Self::parameters).
    ///
    /// The output-layer error term is `(ŷ − y)/B`, the exact derivative of the
    /// unclamped cross-entropy through the sigmoid.
    pub fn loss_and_gradient(
        &self,
        batch: &Matrix,
        labels: &[bool],
        opts: PassOptions,
    ) -> Result<(f64, Vec<f64>, ForwardCache)> {
        if labels.len() != batch.rows() {
            return Err(Error::LengthMismatch {
                expected: batch.rows(),
                found: labels.len(),
            });
        }
        let cache = self.forward_with(batch, opts)?;
        let lambda = self.config.lambda_l1;
        let value = loss(&cache.probs, labels, lambda, self.first_weight())?;
        let grad = self.backward(&cache, labels, opts.bn);
        Ok((value, grad, cache))
    }

    fn backward(&self, cache: &ForwardCache, labels: &[bool], bn: BnStats) -> Vec<f64> {
        let rows = labels.len();
        let inv_rows = 1.0 / rows as f64;
        let dlogit: Vec<f64> = cache
            .probs
            .iter()
            .zip(labels)
            .map(|(&p, &y)| (p - if y { 1.0 } else { 0.0 }) * inv_rows)
            .collect();

        let mut out_w_grad = vec![0.0; self.out_weight.len()];
        for (r, &g) in dlogit.iter().enumerate() {
            axpy(g, cache.last_hidden.row(r), &mut out_w_grad);
        }
        let out_b_grad: f64 = dlogit.iter().sum();

        // gradient w.r.t. the current layer's output activations
        let mut dact = Matrix::zeros(rows, self.out_weight.len());
        for (r, &g) in dlogit.iter().enumerate() {
            axpy(g, &self.out_weight, dact.row_mut(r));
        }

        let mut layer_grads: Vec<[Vec<f64>; 4]> = Vec::with_capacity(self.hidden.len());
        for (idx, (layer, lc)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            let width = layer.out_dim;
            // through dropout and ReLU
            let mut dpre = dact;
            for (i, (g, &a)) in dpre.as_mut_slice().iter_mut().zip(lc.pre_act.as_slice()).enumerate() {
                let scale = if lc.dropout.is_empty() { 1.0 } else { lc.dropout[i] };
                *g = if a > 0.0 { *g * scale } else { 0.0 };
            }
            let mut dscale = vec![0.0; width];
            let mut dshift = vec![0.0; width];
            for r in 0..rows {
                let g = dpre.row(r);
                let n = lc.normalized.row(r);
                for k in 0..width {
                    dscale[k] += g[k] * n[k];
                    dshift[k] += g[k];
                }
            }
            // through normalization
            let mut dz = Matrix::zeros(rows, width);
            match bn {
                BnStats::Running => {
                    for r in 0..rows {
                        let g = dpre.row(r);
                        let out = dz.row_mut(r);
                        for k in 0..width {
                            out[k] = g[k] * layer.bn_scale[k] * lc.inv_std[k];
                        }
                    }
                }
                BnStats::Batch => {
                    // dz = inv_std/B · (B·dn − Σdn − n·Σ(dn·n)), dn = g·scale
                    let mut sum_dn = vec![0.0; width];
                    let mut sum_dn_n = vec![0.0; width];
                    for r in 0..rows {
                        let g = dpre.row(r);
                        let n = lc.normalized.row(r);
                        for k in 0..width {
                            let dn = g[k] * layer.bn_scale[k];
                            sum_dn[k] += dn;
                            sum_dn_n[k] += dn * n[k];
                        }
                    }
                    for r in 0..rows {
                        let g = dpre.row(r).to_vec();
                        let n = lc.normalized.row(r).to_vec();
                        let out = dz.row_mut(r);
                        for k in 0..width {
                            let dn = g[k] * layer.bn_scale[k];
                            out[k] = lc.inv_std[k] * inv_rows * (rows as f64 * dn - sum_dn[k] - n[k] * sum_dn_n[k]);
                        }
                    }
                }
            }
            let in_dim = layer.in_dim;
            let mut dw = vec![0.0; width * in_dim];
            let mut db = vec![0.0; width];
            for k in 0..width {
                let dst = &mut dw[k * in_dim..(k + 1) * in_dim];
                for r in 0..rows {
                    let g = dz.row(r)[k];
                    if g != 0.0 {
                        axpy(g, lc.input.row(r), dst);
                    }
                    db[k] += g;
                }
            }
            if idx == 0 && self.config.lambda_l1 > 0.0 {
                for (g, &w) in dw.iter_mut().zip(&layer.weight) {
                    *g += self.config.lambda_l1 * l1_subgradient(w);
                }
            }
            let mut dinput = Matrix::zeros(rows, in_dim);
            if idx > 0 {
                for r in 0..rows {
                    let g = dz.row(r).to_vec();
                    let dst = dinput.row_mut(r);
                    for (k, &gk) in g.iter().enumerate() {
                        if gk != 0.0 {
                            axpy(gk, &layer.weight[k * in_dim..(k + 1) * in_dim], dst);
                        }
                    }
                }
            }
            layer_grads.push([dw, db, dscale, dshift]);
            dact = dinput;
        }
        layer_grads.reverse();

        let mut grad = Vec::with_capacity(self.param_count());
        for [dw, db, ds, dsh] in layer_grads {
            grad.extend(dw);
            grad.extend(db);
            grad.extend(ds);
            grad.extend(dsh);
        }
        grad.extend(out_w_grad);
        grad.push(out_b_grad);
        grad
    }
}

fn l1_subgradient(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-column mean and biased variance.
fn column_moments(z: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let rows = z.rows() as f64;
    let mut mean = vec![0.0; z.cols()];
    for r in 0..z.rows() {
        axpy(1.0, z.row(r), &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= rows);
    let mut var = vec![0.0; z.cols()];
    for r in 0..z.rows() {
        for (k, &v) in z.row(r).iter().enumerate() {
            let c = v - mean[k];
            var[k] += c * c;
        }
    }
    var.iter_mut().for_each(|v| *v /= rows);
    (mean, var)
}

/// Mean binary cross-entropy of clamped predictions plus `λ·‖W₁‖₁`.
pub fn loss(probs: &[f64], labels: &[bool], lambda: f64, first_weight: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: probs.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::InvalidArgument("loss of an empty batch".into()));
    }
    let bce: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            if y {
                -libm::log(p)
            } else {
                -libm::log(1.0 - p)
            }
        })
        .sum::<f64>()
        / probs.len() as f64;
    let l1: f64 = first_weight.iter().map(|w| w.abs()).sum();
    Ok(bce + lambda * l1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DetectorConfig {
        let mut c = DetectorConfig::new(4);
        c.hidden_dims = vec![6, 5];
        c.dropout_rate = 0.0;
        c.lambda_l1 = 0.0;
        c.seed = 3;
        c
    }

    fn batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let mut cfg = DetectorConfig::new(4096);
        cfg.hidden_dims = vec![1024, 512, 256];
        let a = DetectorModel::init(&cfg).unwrap();
        let b = DetectorModel::init(&cfg).unwrap();
        assert_eq!(a, b);
        let shapes: Vec<(usize, usize)> = a.hidden.iter().map(|l| (l.out_dim, l.in_dim)).collect();
        assert_eq!(shapes, vec![(1024, 4096), (512, 1024), (256, 512)]);
        assert_eq!(a.hidden[0].weight.len(), 1024 * 4096);
        assert_eq!(a.out_weight.len(), 256);
        let bound = 1.0 / libm::sqrt(4096.0);
        assert!(a.hidden[0].weight.iter().all(|w| w.abs() <= bound));
        a.validate().unwrap();
    }

    #[test]
    fn bad_hidden_tail_rejected() {
        let mut cfg = DetectorConfig::new(8);
        cfg.hidden_dims = vec![128];
        assert!(matches!(DetectorModel::init(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_model_predicts_half() {
        let mut m = DetectorModel::init(&DetectorConfig::new(3)).unwrap();
        let zeros = vec![0.0; m.param_count()];
        m.set_parameters(&zeros).unwrap();
        let x = batch(5, 3, 1);
        for p in m.clone().forward(&x, Mode::Eval, 0).unwrap() {
            assert_eq!(p, 0.5);
        }
        assert_eq!(m.predict(&[1.0, -2.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn eval_is_repeatable_and_matches_predict() {
        let mut m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        let x = batch(7, 4, 2);
        let a = m.forward(&x, Mode::Eval, 1).unwrap();
        let b = m.forward(&x, Mode::Eval, 99).unwrap();
        assert_eq!(a, b);
        for (r, &p) in a.iter().enumerate() {
            assert_eq!(m.predict(x.row(r)).unwrap(), p);
        }
    }

    #[test]
    fn train_forward_equals_eval_when_running_stats_match() {
        let mut m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        let x = batch(9, 4, 5);
        let cache = m
            .forward_with(&x, PassOptions { bn: BnStats::Batch, dropout_seed: Some(1) })
            .unwrap();
        for (layer, (mean, var)) in m.hidden.iter_mut().zip(&cache.batch_stats) {
            layer.running_mean = mean.clone();
            layer.running_var = var.clone();
        }
        let eval = m.predict_batch(&x).unwrap();
        for (a, b) in eval.iter().zip(&cache.probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_mode_updates_running_stats() {
        let mut m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        let before = m.hidden[0].running_mean.clone();
        m.forward(&batch(6, 4, 9), Mode::Train, 0).unwrap();
        assert_ne!(before, m.hidden[0].running_mean);
    }

    #[test]
    fn train_mode_needs_two_rows() {
        let mut m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        assert!(m.forward(&batch(1, 4, 0), Mode::Train, 0).is_err());
        assert!(m.forward(&batch(1, 4, 0), Mode::Eval, 0).is_ok());
    }

    #[test]
    fn width_mismatch() {
        let m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        assert_eq!(
            m.predict(&[1.0, 2.0]).unwrap_err(),
            Error::WidthMismatch { expected: 4, found: 2 }
        );
    }

    #[test]
    fn loss_examples() {
        let v = loss(&[0.5], &[true], 0.0, &[]).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-12);
        let v = loss(&[1.0, 0.0], &[true, false], 0.0, &[]).unwrap();
        assert!(v < 1e-6);
        let v = loss(&[1.0], &[true], 0.1, &[1.0, -2.0, 0.0, 3.0]).unwrap();
        assert!((v - 0.6).abs() < 1e-6);
        assert!(loss(&[0.5], &[true, false], 0.0, &[]).is_err());
        assert!(loss(&[0.0], &[true], 0.0, &[]).unwrap().is_finite());
    }

    #[test]
    fn sigmoid_stays_open() {
        for z in [-1e6, -800.0, -40.0, 0.0, 40.0, 800.0, 1e6] {
            let p = sigmoid(z);
            assert!(p > 0.0 && p < 1.0, "{z} → {p}");
        }
    }

    #[test]
    fn parameters_round_trip() {
        let mut m = DetectorModel::init_relaxed(&small_cfg()).unwrap();
        let mut p = m.parameters();
        p.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64);
        m.set_parameters(&p).unwrap();
        assert_eq!(m.parameters(), p);
        assert!(m.set_parameters(&p[1..]).is_err());
    }

    #[test]
    fn bn_output_moments_in_train_mode() {
        let mut cfg = small_cfg();
        cfg.hidden_dims = vec![6];
        let m = DetectorModel::init_relaxed(&cfg).unwrap();
        // large input spread keeps ε/(var+ε) well below the tolerance
        let mut x = batch(32, 4, 11);
        x.as_mut_slice().iter_mut().for_each(|v| *v *= 100.0);
        let cache = m
            .forward_with(&x, PassOptions { bn: BnStats::Batch, dropout_seed: None })
            .unwrap();
        for (layer, lc) in m.hidden.iter().zip(&cache.layers) {
            let (mean, var) = column_moments(&lc.pre_act);
            for k in 0..layer.out_dim {
                assert!((mean[k] - layer.bn_shift[k]).abs() < 1e-6);
                assert!((var[k] - layer.bn_scale[k].powi(2)).abs() < 1e-5, "{}", var[k]);
            }
        }
    }
}
