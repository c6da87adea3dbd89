//! Fully connected regressor (default 444-100-20-1) trained by backpropagation
//! on the mean squared error.
//!
//! Hidden layers use ReLU, the output is linear. Minibatch gradients are
//! computed with dense matrix products; single-sample [`forward`] uses plain
//! dot products, and [`predict`] is defined as repeated [`forward`] calls so
//! batch and single predictions agree bitwise.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

pub const DEFAULT_DIMS: [usize; 4] = [444, 100, 20, 1];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("layer dimensions must be positive and at least two layers long, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("output layer must have width 1, got {0}")]
    OutputWidth(usize),
    #[error("input has {found} features, model expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("{rows} input rows but {targets} targets")]
    TargetCount { rows: usize, targets: usize },
    #[error("loss became non-finite during epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Hard cap on optimizer updates; training stops at whichever of
    /// `epochs` or `max_steps` is reached first.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 500,
            max_steps: Some(DEFAULT_MAX_STEPS),
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Update budget shared by every training run with default settings.
pub const DEFAULT_MAX_STEPS: usize = 12_000;

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NetError::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(NetError::Config("epochs must be at least 1".into()));
        }
        if self.max_steps == Some(0) {
            return Err(NetError::Config("max_steps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(NetError::Config("adam constants out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out × in
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step: u64,
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    beta1_pow: f64,
    beta2_pow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<Layer>,
    pub optimizer: Option<Adam>,
}

/// Gradient of the loss with respect to every layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0, |a, &b| a.max(b.abs()))
    }
}

fn zeros_like(layers: &[Layer]) -> Vec<Layer> {
    layers
        .iter()
        .map(|l| Layer {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.len()),
        })
        .collect()
}

/// He-initialized network: weights ~ Normal(0, 2/fan_in), zero biases.
pub fn init(dims: &[usize], seed: u64) -> Result<MlpModel, NetError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(NetError::BadDims(dims.to_vec()));
    }
    if *dims.last().unwrap() != 1 {
        return Err(NetError::OutputWidth(*dims.last().unwrap()));
    }
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let mut rng = RngStream::for_purpose(seed, "mlp-init", i as u64);
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| std * rng.standard_normal());
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpModel {
        dims: dims.to_vec(),
        activation: Activation::Relu,
        layers,
        optimizer: None,
    })
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

pub fn forward(model: &MlpModel, x: &[f64]) -> Result<f64, NetError> {
    if x.len() != model.input_dim() {
        return Err(NetError::InputDim {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    let last = model.layers.len() - 1;
    let mut act = x.to_vec();
    for (li, layer) in model.layers.iter().enumerate() {
        let next: Vec<f64> = layer
            .weights
            .outer_iter()
            .zip(layer.bias.iter())
            .map(|(row, &b)| {
                let z = row.iter().zip(&act).fold(b, |acc, (w, a)| acc + w * a);
                if li < last {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
        act = next;
    }
    Ok(act[0])
}

/// Row-wise [`forward`], order preserving.
pub fn predict(model: &MlpModel, x: ArrayView2<f64>) -> Result<Vec<f64>, NetError> {
    x.outer_iter()
        .map(|row| match row.as_slice() {
            Some(s) => forward(model, s),
            None => forward(model, &row.to_vec()),
        })
        .collect()
}

fn check_batch(model: &MlpModel, x: &ArrayView2<f64>, y: &[f64]) -> Result<(), NetError> {
    if x.nrows() == 0 {
        return Err(NetError::EmptyBatch);
    }
    if x.ncols() != model.input_dim() {
        return Err(NetError::InputDim {
            expected: model.input_dim(),
            found: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(NetError::TargetCount {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    Ok(())
}

/// MSE over the batch and its exact gradient by backpropagation.
pub fn loss_and_gradients(model: &MlpModel, x: ArrayView2<f64>, y: &[f64]) -> Result<(f64, Gradients), NetError> {
    check_batch(model, &x, y)?;
    let n = x.nrows() as f64;
    let last = model.layers.len() - 1;

    // pre-activations per layer; activations[0] is the input
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    for (li, layer) in model.layers.iter().enumerate() {
        let input = if li == 0 { x } else { acts[li - 1].view() };
        let mut z = input.dot(&layer.weights.t());
        z += &layer.bias;
        if li < last {
            acts.push(z.mapv(|v| v.max(0.0)));
        }
        pre.push(z);
    }

    let out = pre[last].column(0);
    let mut mse = 0.0;
    let mut delta = Array2::<f64>::zeros((x.nrows(), 1));
    for (i, (&p, &t)) in out.iter().zip(y).enumerate() {
        let r = p - t;
        mse += r * r;
        delta[[i, 0]] = 2.0 * r / n;
    }
    mse /= n;

    let mut grads = zeros_like(&model.layers);
    for li in (0..=last).rev() {
        let input = if li == 0 { x } else { acts[li - 1].view() };
        grads[li].weights = delta.t().dot(&input);
        grads[li].bias = delta.sum_axis(Axis(0));
        if li > 0 {
            let mut back = delta.dot(&model.layers[li].weights);
            ndarray::Zip::from(&mut back)
                .and(&pre[li - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = back;
        }
    }
    Ok((mse, Gradients { layers: grads }))
}

/// Applies one optimizer update in place.
pub fn apply_gradients(model: &mut MlpModel, grads: &Gradients, cfg: &TrainConfig) {
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
                layer.weights.scaled_add(-cfg.learning_rate, &g.weights);
                layer.bias.scaled_add(-cfg.learning_rate, &g.bias);
            }
        }
        OptimizerKind::Adam => {
            let adam = model.optimizer.get_or_insert_with(|| Adam {
                step: 0,
                m: zeros_like(&model.layers),
                v: zeros_like(&model.layers),
                beta1_pow: 1.0,
                beta2_pow: 1.0,
            });
            adam.step += 1;
            adam.beta1_pow *= cfg.beta1;
            adam.beta2_pow *= cfg.beta2;
            let c1 = 1.0 - adam.beta1_pow;
            let c2 = 1.0 - adam.beta2_pow;
            let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
            let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            for (li, layer) in model.layers.iter_mut().enumerate() {
                let g = &grads.layers[li];
                let (m, v) = (&mut adam.m[li], &mut adam.v[li]);
                ndarray::Zip::from(&mut layer.weights)
                    .and(&mut m.weights)
                    .and(&mut v.weights)
                    .and(&g.weights)
                    .for_each(|p, m, v, &g| update(p, m, v, g));
                ndarray::Zip::from(&mut layer.bias)
                    .and(&mut m.bias)
                    .and(&mut v.bias)
                    .and(&g.bias)
                    .for_each(|p, m, v, &g| update(p, m, v, g));
            }
        }
    }
    debug_assert!(model.all_finite(), "non-finite parameter after update");
}

/// Seeded minibatch training. Returns the trained model and the mean
/// minibatch MSE of every epoch that ran.
pub fn train(mut model: MlpModel, x: ArrayView2<f64>, y: &[f64], cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>), NetError> {
    cfg.validate()?;
    check_batch(&model, &x, y)?;
    let n = x.nrows();
    let d = x.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::for_purpose(cfg.seed, "mlp-shuffle", 0);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;
    let budget = cfg.max_steps.unwrap_or(usize::MAX);
    let mut batch_x = Array2::<f64>::zeros((cfg.batch_size.min(n), d));
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    'epochs: for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if steps >= budget {
                if seen > 0 {
                    history.push(loss_sum / seen as f64);
                }
                break 'epochs;
            }
            let bx = if chunk.len() == batch_x.nrows() {
                &mut batch_x
            } else {
                batch_x = Array2::zeros((chunk.len(), d));
                &mut batch_x
            };
            batch_y.clear();
            for (r, &i) in chunk.iter().enumerate() {
                bx.row_mut(r).assign(&x.row(i));
                batch_y.push(y[i]);
            }
            let (loss, grads) = loss_and_gradients(&model, bx.view(), &batch_y)?;
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch });
            }
            apply_gradients(&mut model, &grads, cfg);
            if !model.all_finite() {
                return Err(NetError::NonFiniteLoss { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
            steps += 1;
        }
        history.push(loss_sum / seen as f64);
    }
    Ok((model, history))
}

/// Flat, row-major parameter dump used for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub dims: Vec<usize>,
    pub activation: Activation,
    /// one row-major `out × in` list per layer
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn to_params(&self) -> MlpParams {
        MlpParams {
            dims: self.dims.clone(),
            activation: self.activation,
            weights: self.layers.iter().map(|l| l.weights.iter().copied().collect()).collect(),
            biases: self.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }

    pub fn from_params(p: &MlpParams) -> Result<Self, NetError> {
        let shape = init(&p.dims, 0)?;
        if p.weights.len() != shape.layers.len() || p.biases.len() != shape.layers.len() {
            return Err(NetError::Malformed("layer count does not match dims".into()));
        }
        let mut layers = Vec::with_capacity(shape.layers.len());
        for (li, w) in p.dims.windows(2).enumerate() {
            let weights = Array2::from_shape_vec((w[1], w[0]), p.weights[li].clone())
                .map_err(|e| NetError::Malformed(format!("layer {li} weights: {e}")))?;
            if p.biases[li].len() != w[1] {
                return Err(NetError::Malformed(format!("layer {li} bias length")));
            }
            layers.push(Layer {
                weights,
                bias: Array1::from(p.biases[li].clone()),
            });
        }
        let model = MlpModel {
            dims: p.dims.clone(),
            activation: p.activation,
            layers,
            optimizer: None,
        };
        if !model.all_finite() {
            return Err(NetError::Malformed("non-finite parameter".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = init(&[8, 4, 1], 3).unwrap();
        let b = init(&[8, 4, 1], 3).unwrap();
        assert_eq!(a, b);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        assert_ne!(a, init(&[8, 4, 1], 4).unwrap());
    }

    #[test]
    fn he_variance() {
        let m = init(&DEFAULT_DIMS, 42).unwrap();
        let w = &m.layers[0].weights;
        assert_eq!(w.dim(), (100, 444));
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let target = 2.0 / 444.0;
        assert!((var - target).abs() / target < 0.1, "var {var}");
    }

    #[test]
    fn bad_dims() {
        assert!(init(&[3, 0, 1], 0).is_err());
        assert!(init(&[3], 0).is_err());
        assert!(matches!(init(&[3, 2], 0), Err(NetError::OutputWidth(2))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = init(&[5, 3, 1], 1).unwrap();
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        assert_eq!(forward(&m, &[1.0, -2.0, 3.0, 4.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(forward(&m, &[1.0]), Err(NetError::InputDim { .. })));
    }

    #[test]
    fn hand_computed_two_two_one() {
        let m = MlpModel {
            dims: vec![2, 2, 1],
            activation: Activation::Relu,
            layers: vec![
                Layer {
                    weights: array![[1.0, 0.0], [0.0, -1.0]],
                    bias: array![0.5, 0.0],
                },
                Layer {
                    weights: array![[2.0, 3.0]],
                    bias: array![-1.0],
                },
            ],
            optimizer: None,
        };
        // hidden = relu(1 + 0.5, -(-2)) = (1.5, 2); out = 3 + 6 - 1
        assert_eq!(forward(&m, &[1.0, -2.0]).unwrap(), 8.0);
        // second unit clipped: hidden = (1.5, 0); out = 3 - 1
        assert_eq!(forward(&m, &[1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn perfect_model_has_zero_loss_and_gradient() {
        let m = init(&[3, 4, 1], 2).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.5, -0.1, 0.9], [1.0, 1.0, -1.0]];
        let y = predict(&m, x.view()).unwrap();
        let (mse, g) = loss_and_gradients(&m, x.view(), &y).unwrap();
        assert!(mse < 1e-30);
        assert!(g.max_abs() < 1e-14);
    }

    #[test]
    fn doubling_residuals_quadruples_mse() {
        let m = init(&[3, 4, 1], 2).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.5, -0.1, 0.9]];
        let p = predict(&m, x.view()).unwrap();
        let y1: Vec<f64> = p.iter().map(|v| v - 0.25).collect();
        let y2: Vec<f64> = p.iter().map(|v| v - 0.5).collect();
        let (a, _) = loss_and_gradients(&m, x.view(), &y1).unwrap();
        let (b, _) = loss_and_gradients(&m, x.view(), &y2).unwrap();
        assert!((b / a - 4.0).abs() < 1e-9);
    }

    #[test]
    fn empty_batch_rejected() {
        let m = init(&[3, 1], 0).unwrap();
        let x = Array2::<f64>::zeros((0, 3));
        assert_eq!(loss_and_gradients(&m, x.view(), &[]).unwrap_err(), NetError::EmptyBatch);
    }

    #[test]
    fn nan_target_aborts_with_epoch() {
        let m = init(&[2, 3, 1], 0).unwrap();
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let err = train(m, x.view(), &[f64::NAN, 1.0], &cfg).unwrap_err();
        assert_eq!(err, NetError::NonFiniteLoss { epoch: 0 });
    }

    #[test]
    fn step_cap_truncates_training() {
        let m = init(&[2, 3, 1], 0).unwrap();
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let cfg = TrainConfig {
            batch_size: 1,
            epochs: 10,
            max_steps: Some(7),
            ..Default::default()
        };
        let (model, hist) = train(m, x.view(), &[1.0, 0.0, 0.5], &cfg).unwrap();
        assert_eq!(hist.len(), 3);
        assert_eq!(model.optimizer.unwrap().step, 7);
    }

    #[test]
    fn params_round_trip() {
        let m = init(&[6, 5, 2, 1], 9).unwrap();
        let back = MlpModel::from_params(&m.to_params()).unwrap();
        assert_eq!(back.layers, m.layers);
    }
}
