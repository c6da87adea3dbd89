#![allow(dead_code)]

use ndarray::Array2;
use vibaug::fixtures::oracles::finite_difference_gradient;
use vibaug::neuralnet::{init, loss_and_gradients};
use vibaug::rng::RngStream;

/// Denominator floor for relative gradient error. Central differences with
/// h = 1e-5 carry ~1e-11 absolute noise, so components far below this floor
/// are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

/// Max relative error between backprop and central differences for a
/// seeded network and 10-sample batch.
pub fn gradient_check(dims: &[usize], seed: u64) -> f64 {
    let model = init(dims, seed).unwrap();
    let mut rng = RngStream::new(seed, 99);
    let x = Array2::from_shape_fn((10, dims[0]), |_| rng.uniform_range(-1.0, 1.0));
    let y: Vec<f64> = (0..10).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let (_, grads) = loss_and_gradients(&model, x.view(), &y).unwrap();
    let (gw, gb) = finite_difference_gradient(&model, x.view(), &y, FD_STEP);
    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(GRAD_FLOOR);
    let mut worst = 0.0f64;
    for (l, layer) in grads.layers.iter().enumerate() {
        for ((o, i), &a) in layer.weights.indexed_iter() {
            worst = worst.max(rel(a, gw[l][o][i]));
        }
        for (o, &a) in layer.bias.iter().enumerate() {
            worst = worst.max(rel(a, gb[l][o]));
        }
    }
    worst
}
