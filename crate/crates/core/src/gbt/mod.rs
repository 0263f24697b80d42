//! Second-order gradient-boosted regression trees with squared-error loss.

mod features;
mod io;
mod model;
mod params;
mod split;
mod train;
mod tree;

pub use features::{FeatureMatrix, Standardizer};
pub use io::{deserialize, serialize, FORMAT_VERSION};
pub use model::{predict, GBTModel};
pub use params::{EarlyStopping, GBTHyperparams};
pub use split::{best_split, leaf_weight, split_gain};
pub use train::{train, train_with_history, TrainHistory};
pub use tree::{Node, Tree};
