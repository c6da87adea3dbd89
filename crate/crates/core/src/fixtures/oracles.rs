//! Verification oracles. Nothing here calls into `neuralnet` or `metrics`
//! computation paths: each oracle re-derives its quantity from definitions.

use ndarray::ArrayView2;

use crate::metrics::MetricReport;
use crate::neuralnet::MlpModel;

/// Plain nested-vector copy of a network's parameters.
#[derive(Debug, Clone)]
struct Params {
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl Params {
    fn of(model: &MlpModel) -> Self {
        Params {
            weights: model
                .layers
                .iter()
                .map(|l| l.weights.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: model.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }

    fn output(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let last = self.weights.len() - 1;
        for (li, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = Vec::with_capacity(w.len());
            for (row, bias) in w.iter().zip(b) {
                let mut z = *bias;
                for (a, c) in row.iter().zip(&act) {
                    z += a * c;
                }
                next.push(if li == last || z > 0.0 { z } else { 0.0 });
            }
            act = next;
        }
        act[0]
    }

    fn mse(&self, x: ArrayView2<f64>, y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (row, t) in x.rows().into_iter().zip(y) {
            let r = self.output(&row.to_vec()) - t;
            s += r * r;
        }
        s / y.len() as f64
    }
}

/// Central-difference estimate of d(MSE)/dθ for every parameter, laid out as
/// `(weights[layer][out][in], biases[layer][out])`.
#[allow(clippy::type_complexity)]
pub fn finite_difference_gradient(
    model: &MlpModel,
    x: ArrayView2<f64>,
    y: &[f64],
    h: f64,
) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    assert!((1e-7..=1e-3).contains(&h), "step {h} outside [1e-7, 1e-3]");
    let mut p = Params::of(model);
    let mut gw = p.weights.iter().map(|w| w.iter().map(|r| vec![0.0; r.len()]).collect::<Vec<_>>()).collect::<Vec<_>>();
    let mut gb = p.biases.iter().map(|b| vec![0.0; b.len()]).collect::<Vec<_>>();
    for l in 0..p.weights.len() {
        for o in 0..p.weights[l].len() {
            for i in 0..p.weights[l][o].len() {
                let keep = p.weights[l][o][i];
                p.weights[l][o][i] = keep + h;
                let up = p.mse(x, y);
                p.weights[l][o][i] = keep - h;
                let down = p.mse(x, y);
                p.weights[l][o][i] = keep;
                gw[l][o][i] = (up - down) / (2.0 * h);
            }
            let keep = p.biases[l][o];
            p.biases[l][o] = keep + h;
            let up = p.mse(x, y);
            p.biases[l][o] = keep - h;
            let down = p.mse(x, y);
            p.biases[l][o] = keep;
            gb[l][o] = (up - down) / (2.0 * h);
        }
    }
    (gw, gb)
}

/// Neumaier-compensated sum.
fn csum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in it {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Metrics straight from their definitions with compensated two-pass sums.
pub fn oracle_metrics(y: &[f64], yhat: &[f64]) -> Option<MetricReport> {
    if y.is_empty() || y.len() != yhat.len() {
        return None;
    }
    let n = y.len() as f64;
    let my = csum(y.iter().copied()) / n;
    let mp = csum(yhat.iter().copied()) / n;
    let var_y = csum(y.iter().map(|v| (v - my) * (v - my))) / n;
    let var_p = csum(yhat.iter().map(|v| (v - mp) * (v - mp))) / n;
    let cov = csum(y.iter().zip(yhat).map(|(a, b)| (a - my) * (b - mp))) / n;
    let sse = csum(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)));
    let rel: Vec<f64> = y
        .iter()
        .zip(yhat)
        .filter(|(a, _)| a.abs() > 1e-12)
        .map(|(a, b)| ((a - b) / a).abs())
        .collect();
    let two = y.len() >= 2;
    let mse = sse / n;
    Some(MetricReport {
        pcc: (two && var_y > 0.0 && var_p > 0.0).then(|| cov / (var_y.sqrt() * var_p.sqrt())),
        r2: (two && var_y > 0.0).then(|| 1.0 - sse / (var_y * n)),
        mre_percent: (!rel.is_empty()).then(|| 100.0 * csum(rel.iter().copied()) / rel.len() as f64),
        rmse: mse.sqrt(),
        mse,
        n: y.len(),
    })
}
