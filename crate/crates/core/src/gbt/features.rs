use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-item feature vectors, row-major. Missing values are stored as
/// [`FeatureMatrix::MISSING`] (NaN) and routed by each split's default
/// direction; every other value must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    item_ids: Vec<String>,
    n_features: usize,
    values: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub const MISSING: f64 = f64::NAN;

    pub fn new(
        item_ids: Vec<String>,
        n_features: usize,
        values: Vec<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if values.len() != item_ids.len() * n_features {
            return Err(Error::InvalidInput(format!(
                "{} values for {} rows x {} features",
                values.len(),
                item_ids.len(),
                n_features
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(Error::InvalidInput(format!(
                    "{} feature names for {n_features} features",
                    names.len()
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::InvalidInput(format!(
                "infinite feature value at row {}, column {}",
                i / n_features.max(1),
                i % n_features.max(1)
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = item_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate item id {dup}")));
        }
        Ok(Self {
            item_ids,
            n_features,
            values,
            feature_names,
        })
    }

    pub fn from_rows(item_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        if rows.len() != item_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows for {} item ids",
                rows.len(),
                item_ids.len()
            )));
        }
        Self::new(item_ids, d, rows.into_iter().flatten().collect(), None)
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn n_rows(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }

    /// The rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            item_ids: indices.iter().map(|&i| self.item_ids[i].clone()).collect(),
            n_features: self.n_features,
            values: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Reorders rows to follow `ids`; every id must be present.
    pub fn align_to(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = self
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("no features for item {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_rows(&rows))
    }

    /// Column-wise concatenation of two matrices over the same items
    /// (rows of `other` are matched by item id).
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if other.n_rows() != self.n_rows() {
            return Err(Error::InvalidInput(format!(
                "cannot concatenate {} rows with {} rows",
                self.n_rows(),
                other.n_rows()
            )));
        }
        let other = other.align_to(&self.item_ids)?;
        let d = self.n_features + other.n_features;
        let values = (0..self.n_rows())
            .flat_map(|i| self.row(i).iter().chain(other.row(i)).copied().collect::<Vec<_>>())
            .collect();
        let names = match (&self.feature_names, &other.feature_names) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        FeatureMatrix::new(self.item_ids.clone(), d, values, names)
    }
}

/// Per-feature affine map `(x - mean) / scale`, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Fits means and population standard deviations, ignoring missing
    /// values. Constant or all-missing columns get scale 1.
    pub fn fit(x: &FeatureMatrix) -> Self {
        let d = x.n_features();
        let mut means = vec![0.0; d];
        let mut scales = vec![1.0; d];
        for j in 0..d {
            let col: Vec<f64> = (0..x.n_rows()).map(|i| x.get(i, j)).filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                continue;
            }
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
            means[j] = m;
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
        Self { means, scales }
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.n_features() != self.means.len() {
            return Err(Error::InvalidInput(format!(
                "standardizer fitted on {} features, got {}",
                self.means.len(),
                x.n_features()
            )));
        }
        let d = x.n_features();
        let values = x
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.means[k % d]) / self.scales[k % d])
            .collect();
        Ok(FeatureMatrix {
            values,
            ..x.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i}")).collect()
    }

    #[test]
    fn rejects_infinite_and_duplicates() {
        assert!(FeatureMatrix::from_rows(ids(1), vec![vec![f64::INFINITY]]).is_err());
        assert!(FeatureMatrix::from_rows(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(FeatureMatrix::from_rows(ids(1), vec![vec![FeatureMatrix::MISSING]]).is_ok());
    }

    #[test]
    fn concat_aligns_by_id() {
        let a = FeatureMatrix::from_rows(ids(2), vec![vec![1.0], vec![2.0]]).unwrap();
        let b = FeatureMatrix::from_rows(vec!["i1".into(), "i0".into()], vec![vec![20.0], vec![10.0]]).unwrap();
        let c = a.hconcat(&b).unwrap();
        assert_eq!(c.row(0), &[1.0, 10.0]);
        assert_eq!(c.row(1), &[2.0, 20.0]);
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let x = FeatureMatrix::from_rows(ids(3), vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, f64::NAN]])
            .unwrap();
        let s = Standardizer::fit(&x);
        let z = s.apply(&x).unwrap();
        assert!((z.get(0, 0) + 1.224744871391589).abs() < 1e-12);
        assert_eq!(z.get(0, 1), 0.0);
        assert!(z.get(2, 1).is_nan());
    }
}
