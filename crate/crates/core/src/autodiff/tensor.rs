use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dense row-major matrix of f64. All training math runs in double precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
        Tensor2 { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Tensor2 { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor2 { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor2 { rows: r, cols: c, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor2, f: impl Fn(f64, f64) -> f64) -> Tensor2 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in zip_map");
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, c: f64) -> Tensor2 {
        self.map(|v| v * c)
    }

    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Tensor2::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn col_sum(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(1, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c] += self.at(r, c);
            }
        }
        out
    }

    pub fn col_mean(&self) -> Tensor2 {
        self.col_sum().scale(1.0 / self.rows as f64)
    }

    /// (value, flat index) of the first maximal entry.
    pub fn argmax(&self) -> (f64, usize) {
        let mut best = self.data[0];
        let mut idx = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best {
                best = v;
                idx = i;
            }
        }
        (best, idx)
    }

    pub fn argmin(&self) -> (f64, usize) {
        let mut best = self.data[0];
        let mut idx = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v < best {
                best = v;
                idx = i;
            }
        }
        (best, idx)
    }
}

/// Sum of squared entries, `Σ M_ij²`.
pub fn frobenius_norm_sq(m: &Tensor2) -> f64 {
    m.data.iter().map(|v| v * v).sum()
}

/// k-th central moment per column: mean over rows of (x - column mean)^k.
pub fn central_moment(x: &Tensor2, k: u32) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(invalid("central moment order must be >= 2"));
    }
    if x.rows == 0 {
        return Err(invalid("central moment needs at least one row"));
    }
    let means = x.col_mean();
    let mut out = vec![0.0; x.cols];
    for c in 0..x.cols {
        let m = means.data[c];
        let mut acc = 0.0;
        for r in 0..x.rows {
            acc += (x.at(r, c) - m).powi(k as i32);
        }
        out[c] = acc / x.rows as f64;
    }
    Ok(out)
}

/// Numerically stable softmax over a single slice (max-subtraction).
pub fn softmax_row(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(invalid("softmax of an empty vector"));
    }
    let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - mx).exp()).collect();
    let s: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_on_equal_inputs() {
        let p = softmax_row(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_analytic_quarter_three_quarters() {
        let p = softmax_row(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax_row(&[5.0, 5.0, 5.0]).unwrap();
        let b = softmax_row(&[105.0, 105.0, 105.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softmax_empty_rejected() {
        assert!(softmax_row(&[]).is_err());
    }

    #[test]
    fn frobenius_cases() {
        let id = Tensor2::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(frobenius_norm_sq(&id), 2.0);
        assert_eq!(frobenius_norm_sq(&Tensor2::zeros(3, 4)), 0.0);
        let m = Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(frobenius_norm_sq(&m), 30.0);
    }

    #[test]
    fn central_moment_cases() {
        let x = Tensor2::from_rows(&[vec![1.0], vec![-1.0]]);
        assert_eq!(central_moment(&x, 2).unwrap(), vec![1.0]);

        let c = Tensor2::from_rows(&[vec![3.5], vec![3.5], vec![3.5]]);
        assert_eq!(central_moment(&c, 4).unwrap(), vec![0.0]);

        let s = Tensor2::from_rows(&[vec![-1.0], vec![0.0], vec![1.0]]);
        assert!(central_moment(&s, 3).unwrap()[0].abs() < 1e-15);

        assert!(central_moment(&x, 1).is_err());
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Tensor2::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
        assert_eq!(a.transpose().data, vec![1.0, 3.0, 2.0, 4.0]);
    }
}
