//! Segment-level video-audio dependence diagnostic: project each modality's
//! per-segment features onto their first principal coordinate and estimate
//! plug-in mutual information over an equal-width histogram.

use crate::autodiff::Tensor2;
use crate::error::{invalid, Result};

/// Plug-in discrete MI (nats) of two scalar series over equal-width bins.
/// A constant series carries no information; MI is defined as 0 there.
pub fn histogram_mi(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(invalid("histogram_mi needs at least 2 bins"));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid("histogram_mi needs equal-length non-empty series"));
    }
    let bin_index = |v: f64, lo: f64, hi: f64| -> usize {
        if hi <= lo {
            return 0;
        }
        let t = ((v - lo) / (hi - lo) * bins as f64) as usize;
        t.min(bins - 1)
    };
    let (xlo, xhi) = min_max(x);
    let (ylo, yhi) = min_max(y);
    if xhi <= xlo || yhi <= ylo {
        return Ok(0.0);
    }

    let n = x.len() as f64;
    let mut joint = vec![0.0f64; bins * bins];
    let mut px = vec![0.0f64; bins];
    let mut py = vec![0.0f64; bins];
    for (&xv, &yv) in x.iter().zip(y) {
        let i = bin_index(xv, xlo, xhi);
        let j = bin_index(yv, ylo, yhi);
        joint[i * bins + j] += 1.0;
        px[i] += 1.0;
        py[j] += 1.0;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let pij = joint[i * bins + j] / n;
            if pij > 0.0 {
                mi += pij * (pij / (px[i] / n * py[j] / n)).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

fn min_max(x: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// First principal coordinate of an n x d row collection via power
/// iteration on the covariance; deterministic start vector.
pub fn first_principal_coordinate(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(*r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            let ci = r[i] - mean[i];
            for j in 0..d {
                cov[i * d + j] += ci * (r[j] - mean[j]);
            }
        }
    }
    for c in &mut cov {
        *c /= n as f64;
    }

    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    for _ in 0..200 {
        let mut next = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                next[i] += cov[i * d + j] * v[j];
            }
        }
        let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break; // zero covariance, projection is constant anyway
        }
        for x in &mut next {
            *x /= norm;
        }
        v = next;
    }

    rows.iter()
        .map(|r| r.iter().zip(&v).zip(&mean).map(|((&x, &w), &m)| (x - m) * w).sum())
        .collect()
}

/// Per-segment plug-in MI between the two modalities' first principal
/// coordinates, computed across samples.
pub fn segment_mi(f_v: &[Tensor2], f_a: &[Tensor2], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(invalid("segment_mi needs at least 2 bins"));
    }
    if f_v.len() != f_a.len() || f_v.is_empty() {
        return Err(invalid("segment_mi needs equal, non-empty sample lists"));
    }
    let segments = f_v[0].rows;
    for (mv, ma) in f_v.iter().zip(f_a) {
        if mv.rows != segments || ma.rows != segments {
            return Err(invalid("segment_mi: samples disagree in segment count"));
        }
    }

    let mut out = Vec::with_capacity(segments);
    for l in 0..segments {
        let rows_v: Vec<&[f64]> = f_v.iter().map(|m| m.row(l)).collect();
        let rows_a: Vec<&[f64]> = f_a.iter().map(|m| m.row(l)).collect();
        let pv = first_principal_coordinate(&rows_v);
        let pa = first_principal_coordinate(&rows_a);
        out.push(histogram_mi(&pv, &pa, bins)?);
    }
    Ok(out)
}
