mod common;

use common::gradient_check;
use vibaug::fixtures::linear_toy;
use vibaug::neuralnet::{init, predict, train, TrainConfig};

#[test]
fn backprop_matches_central_differences() {
    for dims in [&[8, 4, 1][..], &[20, 10, 5, 1][..]] {
        for seed in 0..5 {
            let err = gradient_check(dims, seed);
            assert!(err <= 1e-6, "dims {dims:?} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn linear_toy_is_learned() {
    let (x, y) = linear_toy(50, 8, 11);
    let cfg = TrainConfig {
        seed: 5,
        max_steps: None,
        ..TrainConfig::default()
    };
    let (model, history) = train(init(&[8, 100, 20, 1], 5).unwrap(), x.view(), &y, &cfg).unwrap();
    assert_eq!(history.len(), 500);
    let pred = predict(&model, x.view()).unwrap();
    let mse = pred.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64;
    assert!(mse < 1e-3, "final train mse {mse}");

    // non-increasing over 50-epoch windows
    let windows: Vec<f64> = history.chunks(50).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    assert!(windows.windows(2).all(|w| w[1] <= w[0]), "{windows:?}");

    let (_, again) = train(init(&[8, 100, 20, 1], 5).unwrap(), x.view(), &y, &cfg).unwrap();
    assert_eq!(history, again);
}

#[test]
fn predict_is_elementwise_and_order_preserving() {
    let (x, y) = linear_toy(30, 8, 2);
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let (model, _) = train(init(&[8, 4, 1], 1).unwrap(), x.view(), &y, &cfg).unwrap();
    let batch = predict(&model, x.view()).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        assert_eq!(batch[i].to_bits(), vibaug::neuralnet::forward(&model, &row.to_vec()).unwrap().to_bits());
    }
    let mut rev = x.clone();
    rev.invert_axis(ndarray::Axis(0));
    let back = predict(&model, rev.view()).unwrap();
    assert!(back.iter().rev().zip(&batch).all(|(a, b)| a == b));
}
