use rand::seq::index;

use super::features::{FeatureMatrix, Standardizer};
use super::model::GBTModel;
use super::params::GBTHyperparams;
use super::split::{leaf_weight, scan_sorted, Regularization, SplitChoice};
use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

const HOLDOUT_SALT: u64 = 0x686f_6c64;

/// Per-round training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Training MSE before the first tree, then after each kept round.
    pub train_mse: Vec<f64>,
    /// Holdout MSE per round when early stopping is enabled.
    pub holdout_mse: Vec<f64>,
    /// Number of rounds kept in the model.
    pub best_rounds: usize,
}

pub fn train(x: &FeatureMatrix, y: &[f64], hp: &GBTHyperparams) -> Result<GBTModel> {
    train_with_history(x, y, hp).map(|(m, _)| m)
}

pub fn train_with_history(
    x: &FeatureMatrix,
    y: &[f64],
    hp: &GBTHyperparams,
) -> Result<(GBTModel, TrainHistory)> {
    hp.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} feature rows",
            y.len(),
            x.n_rows()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", y.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite label at row {i}")));
    }

    let standardizer = hp.standardize.then(|| Standardizer::fit(x));
    let scaled;
    let x = match &standardizer {
        Some(s) => {
            scaled = s.apply(x)?;
            &scaled
        }
        None => x,
    };

    let n = y.len();
    let (train_rows, holdout_rows) = match hp.early_stopping {
        Some(es) => {
            let n_hold = ((n as f64 * es.holdout_fraction).round() as usize).clamp(1, n - 1);
            let mut rng = stream_rng(derive_seed(hp.seed, HOLDOUT_SALT), 0);
            let mut hold = index::sample(&mut rng, n, n_hold).into_vec();
            hold.sort_unstable();
            let mut is_hold = vec![false; n];
            for &i in &hold {
                is_hold[i] = true;
            }
            ((0..n).filter(|&i| !is_hold[i]).collect::<Vec<_>>(), hold)
        }
        None => ((0..n).collect(), Vec::new()),
    };

    let base_score = hp
        .base_score
        .unwrap_or_else(|| train_rows.iter().map(|&i| y[i]).sum::<f64>() / train_rows.len() as f64);

    let grower = Grower::new(x, &train_rows, hp);
    let mut preds = vec![base_score; n];
    let mse = |preds: &[f64], rows: &[usize]| {
        rows.iter().map(|&i| (preds[i] - y[i]).powi(2)).sum::<f64>() / rows.len() as f64
    };
    let mut history = TrainHistory {
        train_mse: vec![mse(&preds, &train_rows)],
        holdout_mse: Vec::new(),
        best_rounds: 0,
    };
    let mut trees = Vec::with_capacity(hp.n_rounds);
    let mut best_holdout = f64::INFINITY;
    let mut since_best = 0;

    for round in 0..hp.n_rounds {
        let grad: Vec<f64> = (0..n).map(|i| preds[i] - y[i]).collect();
        let tree = grower.grow(round as u64, &grad)?;
        for (i, p) in preds.iter_mut().enumerate() {
            *p += hp.learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
        history.train_mse.push(mse(&preds, &train_rows));
        if let Some(es) = hp.early_stopping {
            let h = mse(&preds, &holdout_rows);
            history.holdout_mse.push(h);
            if h < best_holdout {
                best_holdout = h;
                history.best_rounds = trees.len();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= es.patience {
                    break;
                }
            }
        }
    }
    if hp.early_stopping.is_some() {
        trees.truncate(history.best_rounds);
        history.train_mse.truncate(history.best_rounds + 1);
    } else {
        history.best_rounds = trees.len();
    }

    let model = GBTModel {
        base_score,
        learning_rate: hp.learning_rate,
        n_features: x.n_features(),
        trees,
        hyperparams: hp.clone(),
        standardizer,
    };
    Ok((model, history))
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    rows: &'a [usize],
    hp: &'a GBTHyperparams,
    /// Per feature, non-missing rows (indices into `x`) ordered by value.
    sorted: Vec<Vec<usize>>,
    reg: Regularization,
}

impl<'a> Grower<'a> {
    fn new(x: &'a FeatureMatrix, rows: &'a [usize], hp: &'a GBTHyperparams) -> Self {
        let sorted = (0..x.n_features())
            .map(|j| {
                let mut col: Vec<usize> = rows.iter().copied().filter(|&i| !x.get(i, j).is_nan()).collect();
                col.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
                col
            })
            .collect();
        Self {
            x,
            rows,
            hp,
            sorted,
            reg: Regularization {
                lambda: hp.reg_lambda,
                gamma: hp.reg_gamma,
                min_child_weight: hp.min_child_weight,
            },
        }
    }

    fn grow(&self, round: u64, grad: &[f64]) -> Result<Tree> {
        let n = self.x.n_rows();
        let d = self.x.n_features();
        let mut rng = stream_rng(self.hp.seed, round);

        // node_of[i]: arena index of the open node holding row i, if sampled
        let mut node_of: Vec<Option<usize>> = vec![None; n];
        if self.hp.subsample < 1.0 {
            let k = ((self.rows.len() as f64 * self.hp.subsample).round() as usize).max(1);
            for p in index::sample(&mut rng, self.rows.len(), k) {
                node_of[self.rows[p]] = Some(0);
            }
        } else {
            for &i in self.rows {
                node_of[i] = Some(0);
            }
        }
        let features: Vec<usize> = if self.hp.colsample < 1.0 && d > 0 {
            let k = ((d as f64 * self.hp.colsample).round() as usize).clamp(1, d);
            let mut f = index::sample(&mut rng, d, k).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };

        let mut nodes = vec![Node::Leaf { weight: 0.0 }];
        let mut open = vec![0usize];
        for depth in 0..=self.hp.max_depth {
            if open.is_empty() {
                break;
            }
            let sums = self.node_sums(&node_of, grad, nodes.len());
            let mut next_open = Vec::new();
            let mut splits: Vec<(usize, usize, SplitChoice)> = Vec::new();
            if depth < self.hp.max_depth {
                for &node in &open {
                    if let Some((f, choice)) = self.best_node_split(node, &node_of, grad, &features) {
                        splits.push((node, f, choice));
                    }
                }
            }
            for &node in &open {
                match splits.iter().find(|s| s.0 == node) {
                    Some(&(_, feature, choice)) => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf { weight: 0.0 });
                        nodes.push(Node::Leaf { weight: 0.0 });
                        nodes[node] = Node::Split {
                            feature,
                            threshold: choice.threshold,
                            default_left: choice.default_left,
                            left,
                            right: left + 1,
                        };
                        next_open.push(left);
                        next_open.push(left + 1);
                    }
                    None => {
                        let (g, h) = sums[node];
                        nodes[node] = Node::Leaf {
                            weight: leaf_weight(g, h, self.hp.reg_lambda)?,
                        };
                    }
                }
            }
            for (node, feature, choice) in splits {
                let left = match nodes[node] {
                    Node::Split { left, .. } => left,
                    Node::Leaf { .. } => unreachable!(),
                };
                for i in 0..n {
                    if node_of[i] == Some(node) {
                        let v = self.x.get(i, feature);
                        let go_left = if v.is_nan() { choice.default_left } else { v < choice.threshold };
                        node_of[i] = Some(if go_left { left } else { left + 1 });
                    }
                }
            }
            open = next_open;
        }
        Ok(Tree { nodes })
    }

    /// Gradient and hessian sums per node, accumulated in ascending row order.
    fn node_sums(&self, node_of: &[Option<usize>], grad: &[f64], n_nodes: usize) -> Vec<(f64, f64)> {
        let mut sums = vec![(0.0, 0.0); n_nodes];
        for (i, node) in node_of.iter().enumerate() {
            if let Some(k) = node {
                sums[*k].0 += grad[i];
                sums[*k].1 += 1.0;
            }
        }
        sums
    }

    fn best_node_split(
        &self,
        node: usize,
        node_of: &[Option<usize>],
        grad: &[f64],
        features: &[usize],
    ) -> Option<(usize, SplitChoice)> {
        let mut best: Option<(usize, SplitChoice)> = None;
        let mut entries = Vec::new();
        for &j in features {
            entries.clear();
            entries.extend(
                self.sorted[j]
                    .iter()
                    .filter(|&&i| node_of[i] == Some(node))
                    .map(|&i| (self.x.get(i, j), grad[i], 1.0)),
            );
            let mut missing = (0.0, 0.0);
            for &i in self.rows {
                if node_of[i] == Some(node) && self.x.get(i, j).is_nan() {
                    missing.0 += grad[i];
                    missing.1 += 1.0;
                }
            }
            if let Some(choice) = scan_sorted(&entries, missing, self.reg) {
                if best.is_none_or(|(_, b)| choice.gain > b.gain) {
                    best = Some((j, choice));
                }
            }
        }
        best
    }
}
