//! Bias-corrected Adam over the flat parameter list.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor2;
use crate::error::{invalid, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Tensor2>,
    pub v: Vec<Tensor2>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor2]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor2::zeros(p.rows, p.cols)).collect(),
            v: params.iter().map(|p| Tensor2::zeros(p.rows, p.cols)).collect(),
            t: 0,
        }
    }
}

/// One elementwise update: m,v moving averages, bias correction, then
/// params -= lr * m̂ / (√v̂ + eps).
pub fn adam_step(
    params: &mut [&mut Tensor2],
    grads: &[Tensor2],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(invalid("adam_step: parameter/gradient/moment counts disagree"));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.shape() != g.shape() {
            return Err(invalid("adam_step: parameter/gradient shape mismatch"));
        }
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
            v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor2::from_rows(&[vec![1.0, 2.0]]);
        let before = p.clone();
        let mut state = AdamState::new(&[&p]);
        adam_step(
            &mut [&mut p],
            &[Tensor2::zeros(1, 2)],
            &mut state,
            1e-3,
            ADAM_BETA1,
            ADAM_BETA2,
            ADAM_EPS,
        )
        .unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_with_unit_gradient_is_minus_lr() {
        let mut p = Tensor2::scalar(0.0);
        let mut state = AdamState::new(&[&p]);
        adam_step(
            &mut [&mut p],
            &[Tensor2::scalar(1.0)],
            &mut state,
            1e-3,
            ADAM_BETA1,
            ADAM_BETA2,
            ADAM_EPS,
        )
        .unwrap();
        // m̂ = v̂ = 1 after bias correction, so the update is lr/(1+eps).
        let expected = -1e-3 / (1.0 + ADAM_EPS);
        assert!((p.data[0] - expected).abs() < 1e-15, "got {}", p.data[0]);
    }

    #[test]
    fn constant_gradient_step_magnitude_approaches_lr() {
        let mut p = Tensor2::scalar(0.0);
        let mut state = AdamState::new(&[&p]);
        let g = Tensor2::scalar(0.7);
        let mut prev = p.data[0];
        let mut last_step = 0.0;
        for _ in 0..5000 {
            adam_step(&mut [&mut p], &[g.clone()], &mut state, 1e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS).unwrap();
            last_step = prev - p.data[0];
            prev = p.data[0];
        }
        assert!((last_step - 1e-3).abs() < 1e-5, "step = {last_step}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = Tensor2::zeros(2, 2);
        let mut state = AdamState::new(&[&p]);
        let g = Tensor2::zeros(1, 2);
        assert!(adam_step(&mut [&mut p], &[g], &mut state, 1e-3, ADAM_BETA1, ADAM_BETA2, ADAM_EPS).is_err());
    }
}
