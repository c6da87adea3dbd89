//! Bagged CART ensemble with per-split feature subsampling.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_presorted, Presorted, Tree, TreeConfig};
use super::BaselineError;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means ⌈p/3⌉.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

pub fn fit_forest(x: ArrayView2<f64>, y: &[f64], cfg: &ForestConfig) -> Result<Forest, BaselineError> {
    if cfg.n_trees == 0 {
        return Err(BaselineError::Config("n_trees must be at least 1".into()));
    }
    if x.nrows() != y.len() {
        return Err(BaselineError::Shape(format!("{} rows, {} targets", x.nrows(), y.len())));
    }
    let pre = Presorted::new(x)?;
    let n = pre.n_samples();
    let p = pre.n_features();
    let k = cfg.features_per_split.unwrap_or(p.div_ceil(3)).max(1);
    if k > p {
        return Err(BaselineError::Config(format!("features_per_split {k} exceeds {p} features")));
    }
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let weights = if cfg.bootstrap {
                let mut rng = RngStream::for_purpose(cfg.seed, "forest-bootstrap", t as u64);
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.below(n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            let tree_cfg = TreeConfig {
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_leaf,
                features_per_split: Some(k),
                seed: crate::rng::derive_seed(cfg.seed, &format!("forest-tree-{t}")),
            };
            fit_presorted(&pre, y, &weights, &tree_cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest { trees })
}

pub fn predict_forest(forest: &Forest, x: &[f64]) -> f64 {
    forest.trees.iter().map(|t| t.predict(x)).sum::<f64>() / forest.trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::tree::fit_tree;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<f64>) {
        let x = Array2::from_shape_fn((60, 5), |(i, j)| (((i + 3) * (j + 5) * 7919) % 101) as f64 / 10.0);
        let y = x.rows().into_iter().map(|r| r[0] * 0.3 - r[2] + 0.1 * r[4] * r[1]).collect();
        (x, y)
    }

    #[test]
    fn constant_target() {
        let (x, _) = data();
        let f = fit_forest(x.view(), &vec![2.5; 60], &ForestConfig { n_trees: 5, ..Default::default() }).unwrap();
        assert_eq!(predict_forest(&f, &[0.0; 5]), 2.5);
    }

    #[test]
    fn degenerate_forest_equals_cart() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            features_per_split: Some(5),
            ..Default::default()
        };
        let f = fit_forest(x.view(), &y, &cfg).unwrap();
        let t = fit_tree(x.view(), &y, &TreeConfig::default()).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let (x, y) = data();
        let f = fit_forest(x.view(), &y, &ForestConfig { n_trees: 20, seed: 3, ..Default::default() }).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..40 {
            let q: Vec<f64> = (0..5).map(|j| ((i * 31 + j * 17) % 23) as f64 - 5.0).collect();
            let p = predict_forest(&f, &q);
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = data();
        let cfg = ForestConfig { n_trees: 8, seed: 11, ..Default::default() };
        assert_eq!(fit_forest(x.view(), &y, &cfg).unwrap(), fit_forest(x.view(), &y, &cfg).unwrap());
    }
}
