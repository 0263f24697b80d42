use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Holdout-based early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    /// Fraction of training rows held out to monitor squared error.
    pub holdout_fraction: f64,
    /// Rounds without holdout improvement before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTHyperparams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub reg_gamma: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    /// Initial prediction; the label mean when `None`.
    pub base_score: Option<f64>,
    pub seed: u64,
    /// Standardize features before training (stored in the model).
    pub standardize: bool,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for GBTHyperparams {
    fn default() -> Self {
        Self {
            n_rounds: 500,
            max_depth: 6,
            learning_rate: 0.05,
            reg_lambda: 1.0,
            reg_gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 0.8,
            colsample: 0.8,
            base_score: None,
            seed: 0,
            standardize: false,
            early_stopping: None,
        }
    }
}

impl GBTHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return bad(format!("reg_lambda must be >= 0, got {}", self.reg_lambda));
        }
        if !(self.reg_gamma >= 0.0 && self.reg_gamma.is_finite()) {
            return bad(format!("reg_gamma must be >= 0, got {}", self.reg_gamma));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!("min_child_weight must be >= 0, got {}", self.min_child_weight));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample", self.colsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if let Some(b) = self.base_score {
            if !b.is_finite() {
                return bad(format!("base_score must be finite, got {b}"));
            }
        }
        if let Some(es) = self.early_stopping {
            if !(es.holdout_fraction > 0.0 && es.holdout_fraction < 1.0) {
                return bad(format!(
                    "holdout_fraction must lie in (0, 1), got {}",
                    es.holdout_fraction
                ));
            }
            if es.patience == 0 {
                return bad("patience must be positive".into());
            }
        }
        Ok(())
    }
}
