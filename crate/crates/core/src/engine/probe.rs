//! Logistic-regression probe used to measure how much auxiliary-label
//! signal a frozen feature space carries.

use crate::autodiff::Tensor2;
use crate::error::{invalid, Result};

/// Trains a logistic regression on (x_train, y_train) with full-batch
/// gradient descent and reports accuracy on (x_test, y_test). Features are
/// standardized with training statistics; fully deterministic.
pub fn logistic_probe_accuracy(
    x_train: &Tensor2,
    y_train: &[u8],
    x_test: &Tensor2,
    y_test: &[u8],
) -> Result<f64> {
    if x_train.rows != y_train.len() || x_test.rows != y_test.len() {
        return Err(invalid("probe: feature/label counts disagree"));
    }
    if x_train.cols != x_test.cols || x_train.rows == 0 || x_test.rows == 0 {
        return Err(invalid("probe: empty or mismatched feature matrices"));
    }
    let d = x_train.cols;
    let mean = x_train.col_mean();
    let mut std = vec![0.0; d];
    for r in 0..x_train.rows {
        for c in 0..d {
            let v = x_train.at(r, c) - mean.data[c];
            std[c] += v * v;
        }
    }
    for s in &mut std {
        *s = (*s / x_train.rows as f64).sqrt().max(1e-8);
    }
    let norm = |x: &Tensor2, r: usize, c: usize| (x.at(r, c) - mean.data[c]) / std[c];

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let n = x_train.rows as f64;
    let lr = 0.5;
    for _ in 0..500 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for r in 0..x_train.rows {
            let z: f64 = (0..d).map(|c| w[c] * norm(x_train, r, c)).sum::<f64>() + b;
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y_train[r] as f64;
            for c in 0..d {
                gw[c] += err * norm(x_train, r, c);
            }
            gb += err;
        }
        for c in 0..d {
            w[c] -= lr * gw[c] / n;
        }
        b -= lr * gb / n;
    }

    let mut correct = 0usize;
    for r in 0..x_test.rows {
        let z: f64 = (0..d).map(|c| w[c] * norm(x_test, r, c)).sum::<f64>() + b;
        let pred = u8::from(z >= 0.0);
        if pred == y_test[r] {
            correct += 1;
        }
    }
    Ok(correct as f64 / x_test.rows as f64)
}
