//! Least-squares gradient boosting: `F0 = mean(y)`, `Fm = Fm-1 + lr * tree_m`
//! with each tree fitted to the current residuals.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::tree::{fit_presorted, Presorted, Tree, TreeConfig};
use super::BaselineError;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbrConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of rows drawn (without replacement) per stage; 1.0 disables.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbrConfig {
    fn default() -> Self {
        GbrConfig {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrModel {
    pub init: f64,
    pub learning_rate: f64,
    pub stages: Vec<Tree>,
    /// Training MSE after 0, 1, ..., n_stages stages.
    pub train_mse: Vec<f64>,
}

pub fn fit_gbr(x: ArrayView2<f64>, y: &[f64], cfg: &GbrConfig) -> Result<GbrModel, BaselineError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(BaselineError::Config(format!("learning_rate must be positive, got {}", cfg.learning_rate)));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(BaselineError::Config(format!("subsample must lie in (0, 1], got {}", cfg.subsample)));
    }
    if x.nrows() != y.len() {
        return Err(BaselineError::Shape(format!("{} rows, {} targets", x.nrows(), y.len())));
    }
    let pre = Presorted::new(x)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    let n = y.len();
    let init = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![init; n];
    let mse = |f: &[f64]| f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut train_mse = vec![mse(&fitted)];
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        features_per_split: None,
        seed: cfg.seed,
    };
    let mut rng = RngStream::for_purpose(cfg.seed, "gbr-subsample", 0);
    let take = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
    let mut stages = Vec::with_capacity(cfg.n_stages);
    let mut residual = vec![0.0; n];
    for _ in 0..cfg.n_stages {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let weights = if take < n {
            let mut w = vec![0u32; n];
            for i in rng.sample_without_replacement(n, take) {
                w[i] = 1;
            }
            w
        } else {
            vec![1u32; n]
        };
        let tree = fit_presorted(&pre, &residual, &weights, &tree_cfg)?;
        for (i, f) in fitted.iter_mut().enumerate() {
            let row = x.row(i);
            let v = match row.as_slice() {
                Some(s) => tree.predict(s),
                None => tree.predict(&row.to_vec()),
            };
            *f += cfg.learning_rate * v;
        }
        train_mse.push(mse(&fitted));
        stages.push(tree);
    }
    Ok(GbrModel {
        init,
        learning_rate: cfg.learning_rate,
        stages,
        train_mse,
    })
}

pub fn predict_gbr(model: &GbrModel, x: &[f64]) -> f64 {
    model
        .stages
        .iter()
        .fold(model.init, |acc, t| acc + model.learning_rate * t.predict(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn zero_stages_is_mean_predictor() {
        let x = array![[1.0], [2.0], [4.0]];
        let m = fit_gbr(x.view(), &[1.0, 2.0, 6.0], &GbrConfig { n_stages: 0, ..Default::default() }).unwrap();
        assert_eq!(predict_gbr(&m, &[100.0]), 3.0);
    }

    #[test]
    fn single_full_stage_annihilates_residuals() {
        // dyadic targets keep residual arithmetic exact
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0]];
        let y = [0.5, 2.0, -1.25, 3.0];
        let cfg = GbrConfig {
            n_stages: 1,
            learning_rate: 1.0,
            max_depth: None,
            min_leaf: 1,
            ..Default::default()
        };
        let m = fit_gbr(x.view(), &y, &cfg).unwrap();
        for (i, &t) in y.iter().enumerate() {
            assert_eq!(predict_gbr(&m, &x.row(i).to_vec()), t);
        }
    }

    #[test]
    fn training_mse_non_increasing() {
        let x = Array2::from_shape_fn((50, 4), |(i, j)| ((i * 13 + j * 7) % 19) as f64);
        let y: Vec<f64> = (0..50).map(|i| ((i * i) % 11) as f64 * 0.1).collect();
        let m = fit_gbr(x.view(), &y, &GbrConfig::default()).unwrap();
        assert!(m.train_mse.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let x = array![[1.0]];
        assert!(fit_gbr(x.view(), &[1.0], &GbrConfig { learning_rate: 0.0, ..Default::default() }).is_err());
    }
}
