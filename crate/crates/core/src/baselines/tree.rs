//! CART regression trees with exact variance-reduction splits.
//!
//! Training columns are sorted once ([`Presorted`]) and the sorted index lists
//! are stably partitioned as the tree grows, so a node costs time linear in
//! its size per candidate feature. Columns that are constant over the whole
//! training set are never materialized.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena-backed tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features drawn per split; `None` uses every feature.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

/// Column-major copy of the non-constant training columns, each with its
/// ascending sort order.
#[derive(Debug, Clone)]
pub struct Presorted {
    n_samples: usize,
    n_features: usize,
    /// original feature index -> slot in `columns`, `None` when constant
    slot: Vec<Option<usize>>,
    features: Vec<usize>,
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: ArrayView2<f64>) -> Result<Self, BaselineError> {
        let (n, p) = x.dim();
        if n == 0 {
            return Err(BaselineError::EmptyData);
        }
        if n > u32::MAX as usize {
            return Err(BaselineError::Config("too many samples".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BaselineError::NonFinite);
        }
        let mut slot = vec![None; p];
        let mut features = Vec::new();
        let mut columns = Vec::new();
        let mut order = Vec::new();
        for f in 0..p {
            let col: Vec<f64> = x.column(f).to_vec();
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                continue;
            }
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            slot[f] = Some(columns.len());
            features.push(f);
            columns.push(col);
            order.push(idx);
        }
        Ok(Presorted {
            n_samples: n,
            n_features: p,
            slot,
            features,
            columns,
            order,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Features that vary over the training set.
    pub fn active_features(&self) -> &[usize] {
        &self.features
    }
}

pub fn fit_tree(x: ArrayView2<f64>, y: &[f64], cfg: &TreeConfig) -> Result<Tree, BaselineError> {
    let pre = Presorted::new(x)?;
    let weights = vec![1u32; pre.n_samples];
    fit_presorted(&pre, y, &weights, cfg)
}

/// Fits on presorted columns. `weights[i]` is the multiplicity of sample `i`
/// (0 = out of bag).
pub fn fit_presorted(pre: &Presorted, y: &[f64], weights: &[u32], cfg: &TreeConfig) -> Result<Tree, BaselineError> {
    if y.len() != pre.n_samples || weights.len() != pre.n_samples {
        return Err(BaselineError::Shape(format!(
            "{} samples, {} targets, {} weights",
            pre.n_samples,
            y.len(),
            weights.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    if cfg.min_leaf == 0 {
        return Err(BaselineError::Config("min_leaf must be at least 1".into()));
    }
    if let Some(k) = cfg.features_per_split {
        if k == 0 || k > pre.n_features {
            return Err(BaselineError::Config(format!(
                "features_per_split must lie in 1..={}, got {k}",
                pre.n_features
            )));
        }
    }
    let in_bag: Vec<u32> = (0..pre.n_samples as u32).filter(|&i| weights[i as usize] > 0).collect();
    if in_bag.is_empty() {
        return Err(BaselineError::EmptyData);
    }
    let order: Vec<Vec<u32>> = pre
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0).collect())
        .collect();
    let mut b = Builder {
        pre,
        y,
        w: weights,
        cfg,
        order,
        all_samples: in_bag,
        goes_left: vec![false; pre.n_samples],
        scratch: Vec::with_capacity(pre.n_samples),
        rng: RngStream::for_purpose(cfg.seed, "tree-features", 0),
        nodes: Vec::new(),
    };
    b.grow();
    Ok(Tree { nodes: b.nodes })
}

struct Builder<'a> {
    pre: &'a Presorted,
    y: &'a [f64],
    w: &'a [u32],
    cfg: &'a TreeConfig,
    /// per active slot, in-bag samples sorted by that column, partitioned by node
    order: Vec<Vec<u32>>,
    /// in-bag samples partitioned by node (used when no column varies)
    all_samples: Vec<u32>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    rng: RngStream,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn node_samples(&self, lo: usize, hi: usize) -> &[u32] {
        match self.order.first() {
            Some(o) => &o[lo..hi],
            None => &self.all_samples[lo..hi],
        }
    }

    fn grow(&mut self) {
        let m = self.all_samples.len();
        // (node index, lo, hi, depth)
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let mut stack = vec![(0usize, 0usize, m, 0usize)];
        while let Some((at, lo, hi, depth)) = stack.pop() {
            let (wsum, ysum, pure) = {
                let samples = self.node_samples(lo, hi);
                let mut wsum = 0u64;
                let mut ysum = 0.0;
                let first = self.y[samples[0] as usize];
                let mut pure = true;
                for &s in samples {
                    let w = self.w[s as usize];
                    wsum += w as u64;
                    ysum += w as f64 * self.y[s as usize];
                    pure &= self.y[s as usize] == first;
                }
                (wsum, ysum, pure)
            };
            let mean = if pure { self.y[self.node_samples(lo, hi)[0] as usize] } else { ysum / wsum as f64 };
            let min_leaf = self.cfg.min_leaf as u64;
            let stop = pure || wsum < 2 * min_leaf || self.cfg.max_depth.is_some_and(|d| depth >= d);
            let best = if stop { None } else { self.best_split(lo, hi, wsum, ysum) };
            match best {
                None => self.nodes[at] = TreeNode::Leaf { value: mean },
                Some(c) => {
                    let n_left = self.partition(lo, hi, c.feature, c.threshold);
                    let left = self.nodes.len();
                    self.nodes.push(TreeNode::Leaf { value: 0.0 });
                    let right = self.nodes.len();
                    self.nodes.push(TreeNode::Leaf { value: 0.0 });
                    self.nodes[at] = TreeNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    stack.push((right, lo + n_left, hi, depth + 1));
                    stack.push((left, lo, lo + n_left, depth + 1));
                }
            }
        }
    }

    fn varies(&self, slot: usize, lo: usize, hi: usize) -> bool {
        let col = &self.pre.columns[slot];
        let o = &self.order[slot];
        col[o[lo] as usize] < col[o[hi - 1] as usize]
    }

    fn best_split(&mut self, lo: usize, hi: usize, wsum: u64, ysum: f64) -> Option<Candidate> {
        let parent = ysum * ysum / wsum as f64;
        let mut best: Option<Candidate> = None;
        let p = self.pre.n_features;
        match self.cfg.features_per_split {
            Some(k) if k < p => {
                // Draw features without replacement until `k` that vary in
                // this node have been examined.
                let mut pool: Vec<usize> = (0..p).collect();
                let mut examined = 0;
                let mut drawn = 0;
                while examined < k && drawn < p {
                    let j = drawn + self.rng.below(p - drawn);
                    pool.swap(drawn, j);
                    let f = pool[drawn];
                    drawn += 1;
                    if let Some(slot) = self.pre.slot[f] {
                        if self.varies(slot, lo, hi) {
                            examined += 1;
                            self.scan(slot, f, lo, hi, wsum, ysum, parent, &mut best);
                        }
                    }
                }
            }
            _ => {
                for (slot, &f) in self.pre.features.iter().enumerate() {
                    if self.varies(slot, lo, hi) {
                        self.scan(slot, f, lo, hi, wsum, ysum, parent, &mut best);
                    }
                }
            }
        }
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn scan(&self, slot: usize, feature: usize, lo: usize, hi: usize, wsum: u64, ysum: f64, parent: f64, best: &mut Option<Candidate>) {
        let col = &self.pre.columns[slot];
        let o = &self.order[slot][lo..hi];
        let min_leaf = self.cfg.min_leaf as u64;
        let mut wl = 0u64;
        let mut sl = 0.0;
        for i in 0..o.len() - 1 {
            let s = o[i] as usize;
            let w = self.w[s];
            wl += w as u64;
            sl += w as f64 * self.y[s];
            let a = col[s];
            let b = col[o[i + 1] as usize];
            if a == b {
                continue;
            }
            let wr = wsum - wl;
            if wl < min_leaf || wr < min_leaf {
                continue;
            }
            let sr = ysum - sl;
            let score = sl * sl / wl as f64 + sr * sr / wr as f64;
            if score <= parent {
                continue;
            }
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                threshold = a;
            }
            let better = match best {
                None => true,
                Some(c) => {
                    score > c.score
                        || (score == c.score
                            && (feature < c.feature || (feature == c.feature && threshold < c.threshold)))
                }
            };
            if better {
                *best = Some(Candidate {
                    score,
                    feature,
                    threshold,
                });
            }
        }
    }

    /// Stably partitions every sorted list in `[lo, hi)`; returns the left size.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        let slot = self.pre.slot[feature].expect("split on a constant feature");
        let col = &self.pre.columns[slot];
        let mut n_left = 0;
        for &s in &self.order[slot][lo..hi] {
            let left = col[s as usize] <= threshold;
            self.goes_left[s as usize] = left;
            n_left += left as usize;
        }
        let goes_left = &self.goes_left;
        let scratch = &mut self.scratch;
        for list in self.order.iter_mut() {
            let range = &mut list[lo..hi];
            scratch.clear();
            let mut write = 0;
            for k in 0..range.len() {
                let s = range[k];
                if goes_left[s as usize] {
                    range[write] = s;
                    write += 1;
                } else {
                    scratch.push(s);
                }
            }
            range[write..].copy_from_slice(scratch);
        }
        n_left
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn constant_target_is_single_leaf() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]];
        let t = fit_tree(x.view(), &[0.7; 3], &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { value: 0.7 }]);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let t = fit_tree(x.view(), &[0.0, 0.0, 1.0, 1.0], &TreeConfig::default()).unwrap();
        match t.nodes[0] {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 2.5);
                assert_eq!(t.nodes[left], TreeNode::Leaf { value: 0.0 });
                assert_eq!(t.nodes[right], TreeNode::Leaf { value: 1.0 });
            }
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn min_leaf_equal_to_n_gives_mean_leaf() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let cfg = TreeConfig {
            min_leaf: 4,
            ..Default::default()
        };
        let t = fit_tree(x.view(), &[0.0, 1.0, 2.0, 5.0], &cfg).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { value: 2.0 }]);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both columns separate the target identically
        let x = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        let t = fit_tree(x.view(), &[0.0, 0.0, 1.0, 1.0], &TreeConfig::default()).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
        let x = array![[10.0, 1.0], [20.0, 2.0], [30.0, 3.0], [40.0, 4.0]];
        let t = fit_tree(x.view(), &[0.0, 0.0, 1.0, 1.0], &TreeConfig::default()).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, threshold, .. } if threshold == 25.0));
    }

    #[test]
    fn fully_grown_tree_interpolates_training_data() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64);
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = fit_tree(x.view(), &y, &TreeConfig::default()).unwrap();
        for i in 0..40 {
            let row = x.row(i).to_vec();
            // duplicated rows may carry different targets; the leaf holds their mean
            let twins: Vec<f64> = (0..40).filter(|&k| x.row(k) == x.row(i)).map(|k| y[k]).collect();
            let mean = twins.iter().sum::<f64>() / twins.len() as f64;
            assert!((t.predict(&row) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| (i * (j + 1)) as f64);
        let y: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let cfg = TreeConfig {
            min_leaf: 4,
            ..Default::default()
        };
        let pre = Presorted::new(x.view()).unwrap();
        let t = fit_presorted(&pre, &y, &vec![1; 30], &cfg).unwrap();
        let mut counts = std::collections::HashMap::new();
        for i in 0..30 {
            let mut at = 0;
            while let TreeNode::Split { feature, threshold, left, right } = t.nodes[at] {
                at = if x[[i, feature]] <= threshold { left } else { right };
            }
            *counts.entry(at).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 4), "{counts:?}");
    }

    #[test]
    fn errors() {
        let x = Array2::<f64>::zeros((0, 2));
        assert_eq!(fit_tree(x.view(), &[], &TreeConfig::default()), Err(BaselineError::EmptyData));
        let x = array![[1.0], [2.0]];
        let cfg = TreeConfig {
            features_per_split: Some(2),
            ..Default::default()
        };
        assert!(matches!(fit_tree(x.view(), &[1.0, 2.0], &cfg), Err(BaselineError::Config(_))));
    }
}
