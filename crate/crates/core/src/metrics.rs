//! Regression metrics: PCC, R², MRE (%), RMSE and MSE.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// True values at or below this magnitude are left out of the MRE average.
pub const MRE_ZERO_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {truth} true values vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// `pcc`/`r2` are `None` when undefined (constant series or fewer than two
/// samples); `mre_percent` is `None` when every true value is ~0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pcc: Option<f64>,
    pub r2: Option<f64>,
    pub mre_percent: Option<f64>,
    pub rmse: f64,
    pub mse: f64,
    pub n: usize,
}

pub const CSV_HEADER: &str = "target,model,train_size,pcc,r2,mre_percent,rmse,mse,n";

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "undefined".to_string(),
    }
}

impl MetricReport {
    /// One CSV row matching [`CSV_HEADER`].
    pub fn csv_row(&self, target: &str, model: &str, train_size: usize) -> String {
        format!(
            "{target},{model},{train_size},{},{},{},{},{},{}",
            fmt_opt(self.pcc),
            fmt_opt(self.r2),
            fmt_opt(self.mre_percent),
            self.rmse,
            self.mse,
            self.n
        )
    }
}

pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<MetricReport, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = y_true
        .iter()
        .zip(y_pred)
        .position(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(MetricsError::NonFinite(i));
    }

    let n = y_true.len() as f64;
    let mean_t = y_true.iter().sum::<f64>() / n;
    let mean_p = y_pred.iter().sum::<f64>() / n;

    let (mut sxx, mut syy, mut sxy, mut ss_res) = (0.0, 0.0, 0.0, 0.0);
    let (mut rel_sum, mut rel_count) = (0.0, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let dt = t - mean_t;
        let dp = p - mean_p;
        sxx += dt * dt;
        syy += dp * dp;
        sxy += dt * dp;
        let r = t - p;
        ss_res += r * r;
        if t.abs() > MRE_ZERO_CUTOFF {
            rel_sum += (r / t).abs();
            rel_count += 1;
        }
    }

    let enough = y_true.len() >= 2;
    let pcc = (enough && sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0));
    let r2 = (enough && sxx > 0.0).then(|| 1.0 - ss_res / sxx);
    let mse = ss_res / n;
    Ok(MetricReport {
        pcc,
        r2,
        mre_percent: (rel_count > 0).then(|| 100.0 * rel_sum / rel_count as f64),
        rmse: mse.sqrt(),
        mse,
        n: y_true.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [0.2, 0.5, 0.9, 0.4];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(r.pcc, Some(1.0));
        assert_eq!(r.r2, Some(1.0));
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.mre_percent, Some(0.0));
    }

    #[test]
    fn hand_case() {
        let r = evaluate(&[1.0, 2.0, 3.0], &[1.5, 2.0, 2.5]).unwrap();
        assert!((r.pcc.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.r2.unwrap() - 0.75).abs() < 1e-12);
        assert!((r.rmse - (1.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert!((r.mre_percent.unwrap() - 200.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn mean_predictor() {
        let y = [1.0, 2.0, 6.0];
        let r = evaluate(&y, &[3.0; 3]).unwrap();
        assert_eq!(r.r2, Some(0.0));
        assert_eq!(r.pcc, None);
    }

    #[test]
    fn constant_truth_has_undefined_r2() {
        let r = evaluate(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(r.r2, None);
        assert_eq!(r.pcc, None);
        let single = evaluate(&[2.0], &[1.0]).unwrap();
        assert_eq!(single.r2, None);
        assert_eq!(single.mse, 1.0);
    }

    #[test]
    fn negative_r2_is_representable() {
        let r = evaluate(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.r2, Some(-3.0));
        assert!((r.pcc.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pcc_affine_invariance_but_not_r2() {
        let y = [0.1, 0.4, 0.35, 0.8, 0.6];
        let p = [0.2, 0.3, 0.4, 0.7, 0.5];
        let q: Vec<f64> = p.iter().map(|v| 3.0 * v + 1.0).collect();
        let a = evaluate(&y, &p).unwrap();
        let b = evaluate(&y, &q).unwrap();
        assert!((a.pcc.unwrap() - b.pcc.unwrap()).abs() < 1e-12);
        assert!((a.r2.unwrap() - b.r2.unwrap()).abs() > 0.1);
        assert!((a.rmse - b.rmse).abs() > 0.1);
    }

    #[test]
    fn zero_truth_excluded_from_mre() {
        let r = evaluate(&[0.0, 2.0], &[5.0, 1.0]).unwrap();
        assert_eq!(r.mre_percent, Some(50.0));
        assert_eq!(evaluate(&[0.0], &[1.0]).unwrap().mre_percent, None);
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[1.0], &[1.0, 2.0]), Err(MetricsError::LengthMismatch { .. })));
        assert_eq!(evaluate(&[], &[]), Err(MetricsError::Empty));
        assert_eq!(evaluate(&[1.0, f64::NAN], &[1.0, 1.0]), Err(MetricsError::NonFinite(1)));
    }

    #[test]
    fn csv_row_layout() {
        let r = evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.csv_row("rejection", "dnn", 70), "rejection,dnn,70,1,1,0,0,0,3");
    }
}
