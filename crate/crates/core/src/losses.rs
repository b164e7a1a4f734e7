//! The seven training loss terms and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::drd::BundleVars;
use crate::error::{invalid, Result};

pub const PROB_CLAMP_LO: f64 = 1e-7;
pub const PROB_CLAMP_HI: f64 = 1.0 - 1e-7;

/// Central moment discrepancy settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CmdConfig {
    pub max_order_k: usize,
    pub epsilon_range_floor: f64,
}

impl Default for CmdConfig {
    fn default() -> Self {
        CmdConfig { max_order_k: 5, epsilon_range_floor: 1e-8 }
    }
}

impl CmdConfig {
    pub fn with_order(k: usize) -> Self {
        CmdConfig { max_order_k: k, ..Default::default() }
    }
}

/// All loss terms of one step, as plain scalars.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct LossBreakdown {
    pub task: f64,
    pub untask: f64,
    pub orth: f64,
    pub cmd: f64,
    pub recon: f64,
    pub align: f64,
    pub contri: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Reassembles the total from the parts; association mirrors the tape
    /// combination in [`total_loss`] so the match is exact to rounding.
    pub fn recombine(&self, alpha: f64, beta: f64) -> f64 {
        (self.task + self.untask)
            + (alpha * ((self.orth + self.cmd) + self.recon)
                + beta * (self.align + self.contri))
    }
}

/// Tape handles for the individual loss terms.
#[derive(Clone, Copy)]
pub struct LossTermVars {
    pub task: Var,
    pub untask: Var,
    pub orth: Var,
    pub cmd: Var,
    pub recon: Var,
    pub align: Var,
    pub contri: Var,
}

/// CMD distance between two same-shape batches: mean difference plus
/// higher central-moment differences, each normalized by a power of the
/// joint feature range of both batches.
pub fn cmd_loss(t: &mut Tape, x: Var, y: Var, cfg: &CmdConfig) -> Result<Var> {
    let (xs, ys) = (t.value(x).shape(), t.value(y).shape());
    if xs != ys {
        return Err(invalid(format!("cmd_loss shape mismatch: {xs:?} vs {ys:?}")));
    }
    if xs.0 < 2 {
        return Err(invalid("cmd_loss needs at least 2 rows per batch"));
    }
    if cfg.max_order_k < 2 {
        return Err(invalid("cmd max order must be >= 2"));
    }

    let union = t.concat_rows(x, y);
    let hi = t.max_all(union);
    let lo = t.min_all(union);
    let mut range = t.sub(hi, lo);
    if t.scalar_value(range) < cfg.epsilon_range_floor {
        // Degenerate constant batches: clamp the denominator.
        range = t.constant_scalar(cfg.epsilon_range_floor);
    }

    let mx = t.col_mean(x);
    let my = t.col_mean(y);
    let mdiff = t.sub(mx, my);
    let mnorm = t.l2_norm(mdiff);
    let inv_range = t.recip(range);
    let mut total = t.mul(mnorm, inv_range);

    for k in 2..=cfg.max_order_k as i32 {
        let cx = t.central_moment(x, k);
        let cy = t.central_moment(y, k);
        let cdiff = t.sub(cx, cy);
        let cnorm = t.l2_norm(cdiff);
        let range_k = t.powi(range, k);
        let inv_k = t.recip(range_k);
        let term = t.mul(cnorm, inv_k);
        total = t.add(total, term);
    }
    Ok(total)
}

/// Σ over modalities of ‖F_cᵀF_s‖_F² + ‖F_cᵀN_c‖_F² + ‖F_sᵀN_s‖_F².
pub fn orthogonality_loss(t: &mut Tape, bundle_v: &BundleVars, bundle_a: &BundleVars) -> Result<Var> {
    let mut total: Option<Var> = None;
    for b in [bundle_v, bundle_a] {
        let shape = t.value(b.f_c).shape();
        for m in [b.f_s, b.n_c, b.n_s] {
            if t.value(m).shape() != shape {
                return Err(invalid("orthogonality_loss: bundle matrices disagree in shape"));
            }
        }
        for (left, right) in [(b.f_c, b.f_s), (b.f_c, b.n_c), (b.f_s, b.n_s)] {
            let lt = t.transpose(left);
            let gram = t.matmul(lt, right);
            let term = t.frobenius_sq(gram);
            total = Some(match total {
                Some(acc) => t.add(acc, term),
                None => term,
            });
        }
    }
    Ok(total.expect("six terms"))
}

/// (1/|C|) Σ_m (‖F−F̂_self‖² + ‖F−F̂_cross‖²) with |C| = 2 modalities.
pub fn reconstruction_loss(
    t: &mut Tape,
    originals: [Var; 2],
    recon_self: [Var; 2],
    recon_cross: [Var; 2],
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for m in 0..2 {
        let shape = t.value(originals[m]).shape();
        if t.value(recon_self[m]).shape() != shape || t.value(recon_cross[m]).shape() != shape {
            return Err(invalid("reconstruction_loss: shape mismatch"));
        }
        for recon in [recon_self[m], recon_cross[m]] {
            let diff = t.sub(originals[m], recon);
            let term = t.frobenius_sq(diff);
            total = Some(match total {
                Some(acc) => t.add(acc, term),
                None => term,
            });
        }
    }
    Ok(t.scale(total.expect("four terms"), 0.5))
}

/// Mean squared error over a prediction column against constant targets.
pub fn task_loss(t: &mut Tape, pred: Var, target: &[f64]) -> Result<Var> {
    let shape = t.value(pred).shape();
    if shape != (target.len(), 1) {
        return Err(invalid(format!(
            "task_loss: pred shape {shape:?} does not match {} targets",
            target.len()
        )));
    }
    if target.is_empty() {
        return Err(invalid("task_loss: empty target"));
    }
    let tv = t.constant(crate::Tensor2::new(target.len(), 1, target.to_vec()));
    let diff = t.sub(tv, pred);
    let sq = t.mul(diff, diff);
    Ok(t.mean_all(sq))
}

fn check_binary(y_aux: &[u8]) -> Result<()> {
    if y_aux.iter().any(|&v| v > 1) {
        return Err(invalid("labels must be binary"));
    }
    if y_aux.is_empty() {
        return Err(invalid("empty label vector"));
    }
    Ok(())
}

/// Mean binary cross-entropy of a probability column against constant 0/1
/// targets. Probabilities are clamped away from {0,1} before the logs.
pub fn bce_mean(t: &mut Tape, prob: Var, targets: &[f64]) -> Result<Var> {
    let shape = t.value(prob).shape();
    if shape != (targets.len(), 1) {
        return Err(invalid(format!(
            "bce: prob shape {shape:?} does not match {} targets",
            targets.len()
        )));
    }
    let p = t.clamp(prob, PROB_CLAMP_LO, PROB_CLAMP_HI);
    let tv = t.constant(crate::Tensor2::new(targets.len(), 1, targets.to_vec()));
    let one_minus_t = t.constant(crate::Tensor2::new(
        targets.len(),
        1,
        targets.iter().map(|v| 1.0 - v).collect(),
    ));
    let lp = t.ln(p);
    let neg_p = t.scale(p, -1.0);
    let one_minus_p = t.add_const(neg_p, 1.0);
    let lq = t.ln(one_minus_p);
    let a = t.mul(tv, lp);
    let b = t.mul(one_minus_t, lq);
    let s = t.add(a, b);
    let m = t.mean_all(s);
    Ok(t.scale(m, -1.0))
}

/// BCE of the untask head against REVERSED labels 1 − y_aux, making the
/// unrelated features anti-predictive of the auxiliary label.
pub fn untask_loss(t: &mut Tape, pred_prob: Var, y_aux: &[u8]) -> Result<Var> {
    check_binary(y_aux)?;
    let reversed: Vec<f64> = y_aux.iter().map(|&v| 1.0 - v as f64).collect();
    bce_mean(t, pred_prob, &reversed)
}

/// Per-feature BCE against the true labels (not reversed) for the four
/// contribution heads, plus their sum.
pub fn contribution_loss(
    t: &mut Tape,
    head_probs: [Var; 4],
    y_aux: &[u8],
) -> Result<(Var, [Var; 4])> {
    check_binary(y_aux)?;
    let targets: Vec<f64> = y_aux.iter().map(|&v| v as f64).collect();
    let mut per = Vec::with_capacity(4);
    for p in head_probs {
        per.push(bce_mean(t, p, &targets)?);
    }
    let per: [Var; 4] = [per[0], per[1], per[2], per[3]];
    let s01 = t.add(per[0], per[1]);
    let s23 = t.add(per[2], per[3]);
    let total = t.add(s01, s23);
    Ok((total, per))
}

/// Pairwise margin ranking loss over the E=4 stacked features.
///
/// For every ordered pair (u, w), u ≠ w, the indicator is +1 when
/// ℓ[u] < ℓ[w] and −1 otherwise (ties included), and the hinge
/// max(0, s·(W[w] − W[u] + ε)) is accumulated; the sum is scaled by
/// 1/(3·|C|) = 1/6. The ℓ values are treated as constants.
pub fn alignment_loss(t: &mut Tape, w_attn: Var, ell: &[f64], eps: f64) -> Result<Var> {
    let shape = t.value(w_attn).shape();
    if shape != (1, 4) || ell.len() != 4 {
        return Err(invalid("alignment_loss requires exactly E=4 features"));
    }
    if eps <= 0.0 {
        return Err(invalid("alignment margin must be positive"));
    }
    if ell.iter().any(|v| !v.is_finite()) {
        return Err(invalid("alignment_loss: non-finite contribution values"));
    }
    let mut total: Option<Var> = None;
    for u in 0..4 {
        for w in 0..4 {
            if u == w {
                continue;
            }
            let sign = if ell[u] < ell[w] { 1.0 } else { -1.0 };
            let wu = t.slice_cols(w_attn, u, 1);
            let ww = t.slice_cols(w_attn, w, 1);
            let diff = t.sub(ww, wu);
            let arg = t.add_const(diff, eps);
            let signed = t.scale(arg, sign);
            let hinge = t.relu(signed);
            total = Some(match total {
                Some(acc) => t.add(acc, hinge),
                None => hinge,
            });
        }
    }
    Ok(t.scale(total.expect("twelve terms"), 1.0 / 6.0))
}

/// Combines the seven terms into the training objective and the logged
/// breakdown: (task + untask) + α(orth + cmd + recon) + β(align + contri).
pub fn total_loss(t: &mut Tape, parts: &LossTermVars, alpha: f64, beta: f64) -> (Var, LossBreakdown) {
    let diag = t.add(parts.task, parts.untask);
    let oc = t.add(parts.orth, parts.cmd);
    let disent = t.add(oc, parts.recon);
    let disent_w = t.scale(disent, alpha);
    let ac = t.add(parts.align, parts.contri);
    let ind_w = t.scale(ac, beta);
    let weighted = t.add(disent_w, ind_w);
    let total = t.add(diag, weighted);
    let breakdown = LossBreakdown {
        task: t.scalar_value(parts.task),
        untask: t.scalar_value(parts.untask),
        orth: t.scalar_value(parts.orth),
        cmd: t.scalar_value(parts.cmd),
        recon: t.scalar_value(parts.recon),
        align: t.scalar_value(parts.align),
        contri: t.scalar_value(parts.contri),
        total: t.scalar_value(total),
    };
    (total, breakdown)
}
