//! Central-difference gradient checking against the reverse-mode tape.

use super::tape::{Tape, Var};
use super::tensor::Tensor2;
use crate::error::{IdrlError, Result};

/// Compares the reverse-mode gradient of `f` at `x` against central finite
/// differences with step `h`. Returns the max over coordinates of
/// |a - n| / max(1e-8, |a| + |n|).
pub fn grad_check<F>(f: F, x: &Tensor2, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    assert!(h > 0.0, "step must be positive");

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone(), true);
    let loss = f(&mut tape, xv)?;
    let base = tape.scalar_value(loss);
    if !base.is_finite() {
        return Err(IdrlError::Eval(format!("non-finite loss value {base}")));
    }
    let analytic = tape.backward(loss).grad(xv);

    let eval = |pt: &Tensor2| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.leaf(pt.clone(), false);
        let l = f(&mut t, v)?;
        let out = t.scalar_value(l);
        if !out.is_finite() {
            return Err(IdrlError::Eval(format!("non-finite loss value {out}")));
        }
        Ok(out)
    };

    let mut max_err: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data[i] += h;
        let mut minus = x.clone();
        minus.data[i] -= h;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let a = analytic.data[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
