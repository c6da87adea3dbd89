//! ε-insensitive support vector regression with an RBF kernel, trained by
//! SMO with second-order working-set selection.
//!
//! The dual is written over `2n` variables `β = (α, α*)` with signs
//! `s = (+1…, −1…)`:
//!
//! ```text
//! min  ½ βᵀQβ + pᵀβ,   Q_tu = s_t s_u K(x_t, x_u),
//!      p_t = ε − y_t (t < n),  p_t = ε + y_t (t ≥ n),
//!      sᵀβ = 0,  0 ≤ β ≤ C
//! ```
//!
//! Kernel rows are computed on demand and kept in a bounded LRU cache.

use std::collections::HashMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::BaselineError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrConfig {
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    pub c: f64,
    pub epsilon_tube: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub cache_mb: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            gamma: None,
            c: 1.0,
            epsilon_tube: 0.1,
            tolerance: 1e-3,
            max_iterations: 10_000,
            cache_mb: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub gamma: f64,
    /// Intercept `b`.
    pub bias: f64,
    /// `α_i − α_i*` for each retained support vector.
    pub coefficients: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-iteration solver trace, returned alongside the model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SvrTrace {
    /// Dual objective `−(½ βᵀQβ + pᵀβ)` after each SMO step.
    pub dual_objective: Vec<f64>,
    /// Final `α` and `α*`.
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Final maximal KKT violation.
    pub violation: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

struct KernelRows {
    /// row-major, only columns that vary over the training set
    data: Vec<f64>,
    width: usize,
    n: usize,
    gamma: f64,
    cache: HashMap<usize, (Vec<f64>, u64)>,
    capacity: usize,
    clock: u64,
}

impl KernelRows {
    fn new(x: ArrayView2<f64>, gamma: f64, cache_mb: usize) -> Self {
        let (n, p) = x.dim();
        // Constant columns add nothing to training-set distances.
        let keep: Vec<usize> = (0..p)
            .filter(|&j| {
                let c = x.column(j);
                c.iter().any(|&v| v != c[0])
            })
            .collect();
        let mut data = Vec::with_capacity(n * keep.len());
        for row in x.rows() {
            data.extend(keep.iter().map(|&j| row[j]));
        }
        let capacity = ((cache_mb << 20) / (8 * n.max(1))).max(2);
        KernelRows {
            data,
            width: keep.len(),
            n,
            gamma,
            cache: HashMap::new(),
            capacity,
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        let clock = self.clock;
        if !self.cache.contains_key(&i) {
            if self.cache.len() >= self.capacity {
                let oldest = *self
                    .cache
                    .iter()
                    .min_by_key(|(_, (_, t))| *t)
                    .map(|(k, _)| k)
                    .unwrap();
                self.cache.remove(&oldest);
            }
            let w = self.width;
            let xi = &self.data[i * w..(i + 1) * w];
            let row: Vec<f64> = (0..self.n)
                .map(|j| rbf(xi, &self.data[j * w..(j + 1) * w], self.gamma))
                .collect();
            self.cache.insert(i, (row, clock));
        }
        let entry = self.cache.get_mut(&i).unwrap();
        entry.1 = clock;
        &entry.0
    }
}

pub fn fit_svr(x: ArrayView2<f64>, y: &[f64], cfg: &SvrConfig) -> Result<SvrModel, BaselineError> {
    fit_svr_traced(x, y, cfg).map(|(m, _)| m)
}

pub fn fit_svr_traced(x: ArrayView2<f64>, y: &[f64], cfg: &SvrConfig) -> Result<(SvrModel, SvrTrace), BaselineError> {
    let (n, p) = x.dim();
    if n == 0 {
        return Err(BaselineError::EmptyData);
    }
    if y.len() != n {
        return Err(BaselineError::Shape(format!("{n} rows, {} targets", y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    let gamma = cfg.gamma.unwrap_or(1.0 / p.max(1) as f64);
    if !(cfg.c > 0.0 && gamma > 0.0 && cfg.epsilon_tube >= 0.0 && cfg.tolerance > 0.0) {
        return Err(BaselineError::Config("need C > 0, gamma > 0, epsilon >= 0, tolerance > 0".into()));
    }

    let l = 2 * n;
    let c = cfg.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let lin: Vec<f64> = (0..l)
        .map(|t| if t < n { cfg.epsilon_tube - y[t] } else { cfg.epsilon_tube + y[t - n] })
        .collect();
    let mut alpha = vec![0.0; l];
    let mut grad = lin.clone();
    let mut kernel = KernelRows::new(x, gamma, cfg.cache_mb);
    // K(x, x) = 1 for the RBF kernel
    let qd = 1.0;

    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha
            .iter()
            .zip(grad)
            .zip(&lin)
            .map(|((a, g), p)| a * (g + p))
            .sum::<f64>()
    };

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let mut trace = SvrTrace::default();
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while iterations < cfg.max_iterations {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            let s = sign(t);
            let in_up = if s > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && -s * grad[t] >= gmax {
                gmax = -s * grad[t];
                i_sel = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let si = sign(i_sel);
            let ki: Vec<f64> = kernel.row(i_sel % n).to_vec();
            for t in 0..l {
                let st = sign(t);
                let in_low = if st > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let v = st * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let q_it = si * st * ki[t % n];
                    let mut quad = qd + qd - 2.0 * si * st * q_it;
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        violation = gmax + gmax2;
        if violation < cfg.tolerance || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (si, sj) = (sign(i), sign(j));
        let ki: Vec<f64> = kernel.row(i % n).to_vec();
        let kj: Vec<f64> = kernel.row(j % n).to_vec();
        let q_ij = si * sj * ki[j % n];
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if si != sj {
            let mut quad = 2.0 * qd + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = 2.0 * qd - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..l {
            let st = sign(t);
            grad[t] += st * (si * ki[t % n] * dai + sj * kj[t % n] * daj);
        }
        trace.dual_objective.push(-objective(&alpha, &grad));
    }

    // intercept
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..l {
        let s = sign(t);
        let yg = s * grad[t];
        if is_upper(alpha[t]) {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let bias = if free > 0 {
        -free_sum / free as f64
    } else {
        // Any b in [-ub, -lb] satisfies the KKT conditions; take the one
        // closest to the target mean.
        let mean = y.iter().sum::<f64>() / n as f64;
        mean.clamp(-ub, -lb)
    };

    let mut coefficients = Vec::new();
    let mut support_vectors = Vec::new();
    for i in 0..n {
        let beta = alpha[i] - alpha[i + n];
        if beta != 0.0 {
            coefficients.push(beta);
            support_vectors.push(x.row(i).to_vec());
        }
    }
    if !converged {
        log::warn!(
            "SVR solver stopped after {iterations} iterations with KKT violation {violation:.3e} (tolerance {:.1e})",
            cfg.tolerance
        );
    }
    trace.alpha = alpha[..n].to_vec();
    trace.alpha_star = alpha[n..].to_vec();
    trace.violation = violation;
    Ok((
        SvrModel {
            gamma,
            bias,
            coefficients,
            support_vectors,
            converged,
            iterations,
        },
        trace,
    ))
}

pub fn predict_svr(model: &SvrModel, x: &[f64]) -> f64 {
    model
        .coefficients
        .iter()
        .zip(&model.support_vectors)
        .fold(model.bias, |acc, (b, sv)| acc + b * rbf(sv, x, model.gamma))
}
