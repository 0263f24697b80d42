use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, Standardizer};
use super::params::GBTHyperparams;
use super::tree::Tree;
use crate::error::{Error, Result};

/// A trained ensemble. Predictions are `base_score + η·Σ leaf weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    pub hyperparams: GBTHyperparams,
    /// Applied to inputs before routing when training standardized features.
    pub standardizer: Option<Standardizer>,
}

impl GBTModel {
    pub(crate) fn predict_raw_row(&self, row: &[f64]) -> f64 {
        let mut p = self.base_score;
        for tree in &self.trees {
            p += self.learning_rate * tree.predict_row(row);
        }
        p
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_features() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_features()
            )));
        }
        let scaled;
        let x = match &self.standardizer {
            Some(s) => {
                scaled = s.apply(x)?;
                &scaled
            }
            None => x,
        };
        Ok((0..x.n_rows()).map(|i| self.predict_raw_row(x.row(i))).collect())
    }
}

/// Convenience wrapper over [`GBTModel::predict`].
pub fn predict(model: &GBTModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}
