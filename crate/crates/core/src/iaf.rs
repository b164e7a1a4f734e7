//! Individual-aware fusion: stacks the four depression-related features,
//! queries with their per-sample mean, and averages V under the resulting
//! attention weights. Also hosts the prediction heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor2, Var};
use crate::drd::{uniform_init, BundleVars, TwoLayer, TwoLayerVars};
use crate::error::{invalid, Result};

/// Number of stacked features: (F_c^v, F_c^a, F_s^v, F_s^a).
pub const STACK_E: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IafParams {
    pub w_q: Tensor2,
    pub w_k: Tensor2,
    pub w_v: Tensor2,
}

impl IafParams {
    pub fn init(latent_d: usize, rng: &mut impl Rng) -> Self {
        IafParams {
            w_q: uniform_init(latent_d, latent_d, rng),
            w_k: uniform_init(latent_d, latent_d, rng),
            w_v: uniform_init(latent_d, latent_d, rng),
        }
    }

    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> IafVars {
        IafVars {
            w_q: t.leaf(self.w_q.clone(), requires_grad),
            w_k: t.leaf(self.w_k.clone(), requires_grad),
            w_v: t.leaf(self.w_v.clone(), requires_grad),
        }
    }
}

#[derive(Clone, Copy)]
pub struct IafVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
}

impl IafVars {
    pub fn vars(&self) -> [Var; 3] {
        [self.w_q, self.w_k, self.w_v]
    }
}

/// Single affine layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl Linear {
    pub fn init(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: uniform_init(d_in, d_out, rng),
            b: Tensor2::zeros(1, d_out),
        }
    }

    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> LinearVars {
        LinearVars {
            w: t.leaf(self.w.clone(), requires_grad),
            b: t.leaf(self.b.clone(), requires_grad),
        }
    }
}

#[derive(Clone, Copy)]
pub struct LinearVars {
    pub w: Var,
    pub b: Var,
}

impl LinearVars {
    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        t.affine(x, self.w, self.b)
    }

    pub fn vars(&self) -> [Var; 2] {
        [self.w, self.b]
    }
}

/// Prediction heads: the task regressor over the fused feature, the untask
/// classifier over the stacked unrelated features, and one contribution
/// head shared across the four depression-related features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub task: TwoLayer,
    pub untask: Linear,
    pub contri: Linear,
}

impl HeadParams {
    pub fn init(latent_d: usize, hidden_h: usize, rng: &mut impl Rng) -> Self {
        HeadParams {
            task: TwoLayer::init(latent_d, hidden_h, 1, rng),
            untask: Linear::init(4 * latent_d, 1, rng),
            contri: Linear::init(latent_d, 1, rng),
        }
    }

    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> HeadVars {
        HeadVars {
            task: self.task.register(t, requires_grad),
            untask: self.untask.register(t, requires_grad),
            contri: self.contri.register(t, requires_grad),
        }
    }
}

#[derive(Clone, Copy)]
pub struct HeadVars {
    pub task: TwoLayerVars,
    pub untask: LinearVars,
    pub contri: LinearVars,
}

/// Tape handles for the fusion output.
#[derive(Clone, Copy)]
pub struct FusionVars {
    /// Fused representation, B x d.
    pub f_s: Var,
    /// Attention weights, B x 4, rows on the simplex.
    pub w_attn: Var,
}

/// Value-level fusion output.
#[derive(Clone, Debug)]
pub struct FusionResult {
    pub f_s: Tensor2,
    pub w_attn: Tensor2,
}

impl FusionResult {
    pub fn from_vars(t: &Tape, f: &FusionVars) -> Self {
        FusionResult {
            f_s: t.value(f.f_s).clone(),
            w_attn: t.value(f.w_attn).clone(),
        }
    }
}

/// Per sample: stack S = (F_c^v, F_c^a, F_s^v, F_s^a), project to Q/K/V,
/// query with the row-mean of Q, softmax(Q_ind Kᵀ/√d) and mix V.
pub fn fuse(
    t: &mut Tape,
    bundle_v: &BundleVars,
    bundle_a: &BundleVars,
    iv: &IafVars,
) -> Result<FusionVars> {
    let shape = t.value(bundle_v.f_c).shape();
    for m in [bundle_v.f_s, bundle_a.f_c, bundle_a.f_s] {
        if t.value(m).shape() != shape {
            return Err(invalid("fuse: bundle matrices disagree in shape"));
        }
    }
    let (batch, d) = shape;
    if batch == 0 {
        return Err(invalid("fuse: empty batch"));
    }
    if t.value(iv.w_q).shape() != (d, d) {
        return Err(invalid("fuse: projection width does not match latent width"));
    }
    let scale = 1.0 / (d as f64).sqrt();

    let mut f_s_rows: Option<Var> = None;
    let mut w_rows: Option<Var> = None;
    for i in 0..batch {
        let fcv = t.slice_rows(bundle_v.f_c, i, 1);
        let fca = t.slice_rows(bundle_a.f_c, i, 1);
        let fsv = t.slice_rows(bundle_v.f_s, i, 1);
        let fsa = t.slice_rows(bundle_a.f_s, i, 1);
        let top = t.concat_rows(fcv, fca);
        let bottom = t.concat_rows(fsv, fsa);
        let stack = t.concat_rows(top, bottom);

        let q = t.matmul(stack, iv.w_q);
        let k = t.matmul(stack, iv.w_k);
        let v = t.matmul(stack, iv.w_v);
        let q_ind = t.col_mean(q);
        let kt = t.transpose(k);
        let logits_raw = t.matmul(q_ind, kt);
        let logits = t.scale(logits_raw, scale);
        let w = t.softmax_rows(logits);
        let fused = t.matmul(w, v);

        f_s_rows = Some(match f_s_rows {
            Some(acc) => t.concat_rows(acc, fused),
            None => fused,
        });
        w_rows = Some(match w_rows {
            Some(acc) => t.concat_rows(acc, w),
            None => w,
        });
    }
    Ok(FusionVars {
        f_s: f_s_rows.expect("non-empty batch"),
        w_attn: w_rows.expect("non-empty batch"),
    })
}

/// Shared contribution head: sigmoid(single affine layer), applied to each
/// of the four depression-related feature matrices.
pub fn contribution_probs(
    t: &mut Tape,
    bundle_v: &BundleVars,
    bundle_a: &BundleVars,
    head: &LinearVars,
) -> [Var; 4] {
    let feats = [bundle_v.f_c, bundle_a.f_c, bundle_v.f_s, bundle_a.f_s];
    feats.map(|f| {
        let z = head.forward(t, f);
        t.sigmoid(z)
    })
}

/// Untask head over the flattened stacked unrelated features
/// (N_c^v | N_c^a | N_s^v | N_s^a), one probability per sample.
pub fn untask_prob(
    t: &mut Tape,
    bundle_v: &BundleVars,
    bundle_a: &BundleVars,
    head: &LinearVars,
) -> Var {
    let nc = t.concat_cols(bundle_v.n_c, bundle_a.n_c);
    let ns = t.concat_cols(bundle_v.n_s, bundle_a.n_s);
    let n = t.concat_cols(nc, ns);
    let z = head.forward(t, n);
    t.sigmoid(z)
}
