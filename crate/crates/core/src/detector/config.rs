use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Width every hidden stack must end in.
pub const FINAL_HIDDEN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub lambda_l1: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl DetectorConfig {
    /// Defaults: hidden `[1024, 512, 256]`, dropout 0.2, λ 1e-4, lr 0.01,
    /// batch 64, 200 epochs, seed 0.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![1024, 512, FINAL_HIDDEN],
            dropout_rate: 0.2,
            lambda_l1: 1e-4,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 64,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shapes_and_rates()?;
        if self.hidden_dims.last() != Some(&FINAL_HIDDEN) {
            bail!(
                InvalidConfig,
                "hidden_dims {:?} must end in {FINAL_HIDDEN}",
                self.hidden_dims
            );
        }
        Ok(())
    }

    /// Same checks as [`validate`](Self::validate) minus the final-width
    /// rule; lets gradient checks run on tiny networks.
    #[doc(hidden)]
    pub fn validate_relaxed(&self) -> Result<()> {
        self.validate_shapes_and_rates()
    }

    fn validate_shapes_and_rates(&self) -> Result<()> {
        if self.input_dim == 0 {
            bail!(InvalidConfig, "input_dim must be positive");
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            bail!(InvalidConfig, "hidden_dims must be non-empty with positive widths");
        }
        if !(self.dropout_rate.is_finite() && (0.0..1.0).contains(&self.dropout_rate)) {
            bail!(InvalidConfig, "dropout_rate {} outside [0, 1)", self.dropout_rate);
        }
        if !(self.lambda_l1.is_finite() && self.lambda_l1 >= 0.0) {
            bail!(InvalidConfig, "lambda_l1 must be finite and non-negative");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            bail!(InvalidConfig, "learning_rate must be finite and positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            bail!(InvalidConfig, "epochs and batch_size must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DetectorConfig::new(16).validate().unwrap();
    }

    #[test]
    fn final_width_rule() {
        let mut c = DetectorConfig::new(8);
        c.hidden_dims = vec![64, 32];
        assert!(c.validate().is_err());
        assert!(c.validate_relaxed().is_ok());
    }

    #[test]
    fn rate_bounds() {
        let mut c = DetectorConfig::new(8);
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c.learning_rate = 0.1;
        c.lambda_l1 = f64::NAN;
        assert!(c.validate().is_err());
    }
}
