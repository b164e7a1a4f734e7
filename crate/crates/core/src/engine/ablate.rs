//! Loss-term ablation sweeps under a shared seed and split.

use crate::datagen::Dataset;
use crate::engine::config::{LossToggles, TrainConfig};
use crate::engine::metrics::{evaluate_indices, MetricsReport};
use crate::engine::train::{split_indices, train};
use crate::error::Result;

/// The full configuration plus each single term removed, mirroring the
/// loss-ablation protocol.
pub fn default_toggle_sets() -> Vec<(String, LossToggles)> {
    let full = LossToggles::default();
    let mut sets = vec![("full".to_string(), full)];
    sets.push(("no_orth".into(), LossToggles { orth: false, ..full }));
    sets.push(("no_cmd".into(), LossToggles { cmd: false, ..full }));
    sets.push(("no_untask".into(), LossToggles { untask: false, ..full }));
    sets.push(("no_align".into(), LossToggles { align: false, ..full }));
    sets.push(("no_contri".into(), LossToggles { contri: false, ..full }));
    sets.push(("no_recon".into(), LossToggles { recon: false, ..full }));
    sets
}

/// Trains one model per toggle set under the identical seed and split and
/// reports validation metrics for each.
pub fn ablate(
    dataset: &Dataset,
    base_config: &TrainConfig,
    toggle_sets: &[(String, LossToggles)],
) -> Result<Vec<(String, MetricsReport)>> {
    let (_, val_idx) = split_indices(dataset.len(), base_config.seed);
    let mut out = Vec::with_capacity(toggle_sets.len());
    for (name, toggles) in toggle_sets {
        let cfg = TrainConfig { toggles: *toggles, ..base_config.clone() };
        let outcome = train(dataset, &cfg)?;
        let report = evaluate_indices(&outcome.checkpoint, dataset, &val_idx)?;
        out.push((name.clone(), report));
    }
    Ok(out)
}
