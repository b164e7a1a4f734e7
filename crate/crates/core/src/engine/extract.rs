//! Forward-only feature extraction for CSV dumps and probing.

use crate::autodiff::{Tape, Tensor2};
use crate::drd::DisentangledBundle;
use crate::engine::config::TrainConfig;
use crate::engine::model::{forward_model, BatchData, ModelParams};
use crate::error::Result;
use crate::iaf::FusionResult;

pub struct ExtractedFeatures {
    pub bundle_v: DisentangledBundle,
    pub bundle_a: DisentangledBundle,
    pub fusion: FusionResult,
    /// Raw task-head outputs, one per sample.
    pub task_out: Vec<f64>,
}

pub fn extract(params: &ModelParams, cfg: &TrainConfig, batch: &BatchData) -> Result<ExtractedFeatures> {
    let mut tape = Tape::new();
    let mv = params.register(&mut tape, false);
    let fwd = forward_model(&mut tape, &mv, batch, cfg.latent_d)?;
    Ok(ExtractedFeatures {
        bundle_v: DisentangledBundle::from_vars(&tape, &fwd.bundle_v),
        bundle_a: DisentangledBundle::from_vars(&tape, &fwd.bundle_a),
        fusion: FusionResult::from_vars(&tape, &fwd.fusion),
        task_out: tape.value(fwd.task_out).data.clone(),
    })
}

impl ExtractedFeatures {
    /// Stacked unrelated features (N_c^v | N_c^a | N_s^v | N_s^a), B x 4d.
    pub fn stacked_n(&self) -> Tensor2 {
        let b = self.bundle_v.n_c.rows;
        let d = self.bundle_v.n_c.cols;
        let mut out = Tensor2::zeros(b, 4 * d);
        for r in 0..b {
            for (slot, m) in [
                &self.bundle_v.n_c,
                &self.bundle_a.n_c,
                &self.bundle_v.n_s,
                &self.bundle_a.n_s,
            ]
            .iter()
            .enumerate()
            {
                out.data[r * 4 * d + slot * d..r * 4 * d + (slot + 1) * d]
                    .copy_from_slice(m.row(r));
            }
        }
        out
    }
}
