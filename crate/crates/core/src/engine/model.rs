//! Full-model parameter container and the per-batch forward/loss pass.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor2, Var};
use crate::drd::{self, BundleVars, DrdParams, ModalityVars};
use crate::engine::config::{TaskMode, TrainConfig};
use crate::error::{invalid, Result};
use crate::iaf::{self, FusionVars, HeadParams, HeadVars, IafParams, IafVars};
use crate::losses::{self, CmdConfig, LossBreakdown, LossTermVars};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub drd: DrdParams,
    pub iaf: IafParams,
    pub heads: HeadParams,
}

impl ModelParams {
    pub fn init(d_v: usize, d_a: usize, latent_d: usize, hidden_h: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        ModelParams {
            drd: DrdParams::init(d_v, d_a, latent_d, hidden_h, &mut rng),
            iaf: IafParams::init(latent_d, &mut rng),
            heads: HeadParams::init(latent_d, hidden_h, &mut rng),
        }
    }

    /// All parameter tensors in a fixed order shared with
    /// [`ModelVars::vars`] and [`ModelParams::tensors_mut`].
    pub fn tensors(&self) -> Vec<&Tensor2> {
        let mut out = Vec::with_capacity(35);
        for m in [&self.drd.v, &self.drd.a] {
            for layer in [&m.enc_common, &m.enc_specific, &m.decoder] {
                out.extend([&layer.w1, &layer.b1, &layer.w2, &layer.b2]);
            }
        }
        out.extend([&self.iaf.w_q, &self.iaf.w_k, &self.iaf.w_v]);
        out.extend([
            &self.heads.task.w1,
            &self.heads.task.b1,
            &self.heads.task.w2,
            &self.heads.task.b2,
        ]);
        out.extend([&self.heads.untask.w, &self.heads.untask.b]);
        out.extend([&self.heads.contri.w, &self.heads.contri.b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::with_capacity(35);
        for m in [&mut self.drd.v, &mut self.drd.a] {
            for layer in [&mut m.enc_common, &mut m.enc_specific, &mut m.decoder] {
                out.extend([&mut layer.w1, &mut layer.b1, &mut layer.w2, &mut layer.b2]);
            }
        }
        out.extend([&mut self.iaf.w_q, &mut self.iaf.w_k, &mut self.iaf.w_v]);
        out.extend([
            &mut self.heads.task.w1,
            &mut self.heads.task.b1,
            &mut self.heads.task.w2,
            &mut self.heads.task.b2,
        ]);
        out.extend([&mut self.heads.untask.w, &mut self.heads.untask.b]);
        out.extend([&mut self.heads.contri.w, &mut self.heads.contri.b]);
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|t| t.shape()).collect()
    }

    /// Row-major concatenation of every parameter into a single 1 x P row.
    pub fn flatten(&self) -> Tensor2 {
        let mut data = Vec::new();
        for t in self.tensors() {
            data.extend_from_slice(&t.data);
        }
        Tensor2::new(1, data.len(), data)
    }

    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> ModelVars {
        let vars: Vec<Var> = self
            .tensors()
            .into_iter()
            .map(|p| t.leaf(p.clone(), requires_grad))
            .collect();
        ModelVars::from_vars(&vars)
    }
}

#[derive(Clone, Copy)]
pub struct ModelVars {
    pub drd_v: ModalityVars,
    pub drd_a: ModalityVars,
    pub iaf: IafVars,
    pub heads: HeadVars,
}

impl ModelVars {
    /// Rebuilds the structured view from a flat var list in the
    /// [`ModelParams::tensors`] order.
    pub fn from_vars(vars: &[Var]) -> ModelVars {
        assert_eq!(vars.len(), 35, "expected 35 parameter tensors");
        let two = |o: usize| crate::drd::TwoLayerVars {
            w1: vars[o],
            b1: vars[o + 1],
            w2: vars[o + 2],
            b2: vars[o + 3],
        };
        let modality = |o: usize| ModalityVars {
            enc_common: two(o),
            enc_specific: two(o + 4),
            decoder: two(o + 8),
        };
        ModelVars {
            drd_v: modality(0),
            drd_a: modality(12),
            iaf: IafVars { w_q: vars[24], w_k: vars[25], w_v: vars[26] },
            heads: HeadVars {
                task: two(27),
                untask: iaf::LinearVars { w: vars[31], b: vars[32] },
                contri: iaf::LinearVars { w: vars[33], b: vars[34] },
            },
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::with_capacity(35);
        for m in [&self.drd_v, &self.drd_a] {
            for layer in [&m.enc_common, &m.enc_specific, &m.decoder] {
                out.extend(layer.vars());
            }
        }
        out.extend(self.iaf.vars());
        out.extend(self.heads.task.vars());
        out.extend(self.heads.untask.vars());
        out.extend(self.heads.contri.vars());
        out
    }
}

/// One training batch: pooled per-modality features plus labels.
#[derive(Clone, Debug)]
pub struct BatchData {
    pub xv: Tensor2,
    pub xa: Tensor2,
    pub y_reg: Vec<f64>,
    pub y_aux: Vec<u8>,
}

pub struct ForwardVars {
    pub xv: Var,
    pub xa: Var,
    pub bundle_v: BundleVars,
    pub bundle_a: BundleVars,
    pub recon_self: [Var; 2],
    pub recon_cross: [Var; 2],
    pub fusion: FusionVars,
    /// Raw task head output (score in regression, logit in classification).
    pub task_out: Var,
    pub untask_prob: Var,
    pub contri_probs: [Var; 4],
}

/// Encode both modalities, reconstruct, fuse, and run every head.
pub fn forward_model(t: &mut Tape, mv: &ModelVars, batch: &BatchData, latent_d: usize) -> Result<ForwardVars> {
    if batch.xv.rows != batch.xa.rows
        || batch.xv.rows != batch.y_reg.len()
        || batch.y_reg.len() != batch.y_aux.len()
    {
        return Err(invalid("forward_model: batch row counts disagree"));
    }
    let xv = t.constant(batch.xv.clone());
    let xa = t.constant(batch.xa.clone());

    let bundle_v = drd::encode(t, xv, &mv.drd_v, latent_d)?;
    let bundle_a = drd::encode(t, xa, &mv.drd_a, latent_d)?;

    let self_v = drd::decode_self(t, &bundle_v, &mv.drd_v)?;
    let self_a = drd::decode_self(t, &bundle_a, &mv.drd_a)?;
    let cross_v = drd::decode_cross(t, &bundle_v, bundle_a.f_c, &mv.drd_v)?;
    let cross_a = drd::decode_cross(t, &bundle_a, bundle_v.f_c, &mv.drd_a)?;

    let fusion = iaf::fuse(t, &bundle_v, &bundle_a, &mv.iaf)?;
    let task_out = mv.heads.task.forward(t, fusion.f_s);
    let untask_prob = iaf::untask_prob(t, &bundle_v, &bundle_a, &mv.heads.untask);
    let contri_probs = iaf::contribution_probs(t, &bundle_v, &bundle_a, &mv.heads.contri);

    Ok(ForwardVars {
        xv,
        xa,
        bundle_v,
        bundle_a,
        recon_self: [self_v, self_a],
        recon_cross: [cross_v, cross_a],
        fusion,
        task_out,
        untask_prob,
        contri_probs,
    })
}

/// Per-feature contribution losses of the last computed batch, as plain
/// values, in stack order.
pub struct BatchLosses {
    pub total: Var,
    pub breakdown: LossBreakdown,
    pub ell: [f64; 4],
}

/// Evaluates the seven terms with the config's toggles and combines them.
/// Disabled terms are logged as exact zeros and contribute no gradient.
pub fn compute_losses(
    t: &mut Tape,
    fwd: &ForwardVars,
    batch: &BatchData,
    cfg: &TrainConfig,
) -> Result<BatchLosses> {
    let zero = |t: &mut Tape| t.constant_scalar(0.0);

    let task = match cfg.task_mode {
        TaskMode::Regression => losses::task_loss(t, fwd.task_out, &batch.y_reg)?,
        TaskMode::Classification => {
            let prob = t.sigmoid(fwd.task_out);
            let targets: Vec<f64> = batch.y_aux.iter().map(|&v| v as f64).collect();
            losses::bce_mean(t, prob, &targets)?
        }
    };

    let untask = if cfg.toggles.untask {
        losses::untask_loss(t, fwd.untask_prob, &batch.y_aux)?
    } else {
        zero(t)
    };

    let (contri, ell) = {
        let (total, per) = losses::contribution_loss(t, fwd.contri_probs, &batch.y_aux)?;
        let ell = [
            t.scalar_value(per[0]),
            t.scalar_value(per[1]),
            t.scalar_value(per[2]),
            t.scalar_value(per[3]),
        ];
        let term = if cfg.toggles.contri { total } else { zero(t) };
        (term, ell)
    };

    let align = if cfg.toggles.align {
        // Batch-mean attention row ranks against batch-mean per-feature
        // losses; the contribution values enter as constants.
        let w_mean = t.col_mean(fwd.fusion.w_attn);
        losses::alignment_loss(t, w_mean, &ell, cfg.epsilon_margin)?
    } else {
        zero(t)
    };

    let orth = if cfg.toggles.orth {
        losses::orthogonality_loss(t, &fwd.bundle_v, &fwd.bundle_a)?
    } else {
        zero(t)
    };

    let cmd = if cfg.toggles.cmd {
        let cmd_cfg = CmdConfig::with_order(cfg.cmd_k);
        losses::cmd_loss(t, fwd.bundle_v.f_c, fwd.bundle_a.f_c, &cmd_cfg)?
    } else {
        zero(t)
    };

    let recon = if cfg.toggles.recon {
        losses::reconstruction_loss(t, [fwd.xv, fwd.xa], fwd.recon_self, fwd.recon_cross)?
    } else {
        zero(t)
    };

    let parts = LossTermVars { task, untask, orth, cmd, recon, align, contri };
    let (total, breakdown) = losses::total_loss(t, &parts, cfg.alpha, cfg.beta);
    Ok(BatchLosses { total, breakdown, ell })
}
