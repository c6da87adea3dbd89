//! Classical regressors used as comparison points: CART, random forest,
//! gradient boosting and ε-SVR.

use thiserror::Error;

pub mod forest;
pub mod gbr;
pub mod svr;
pub mod tree;

pub use forest::{fit_forest, predict_forest, Forest, ForestConfig};
pub use gbr::{fit_gbr, predict_gbr, GbrConfig, GbrModel};
pub use svr::{fit_svr, predict_svr, SvrConfig, SvrModel};
pub use tree::{fit_tree, Tree, TreeConfig, TreeNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("no training samples")]
    EmptyData,
    #[error("non-finite training value")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
}
