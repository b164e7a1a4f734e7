//! Training orchestration: seeded splits, mini-batch epochs, early stopping
//! on validation total loss, and checkpointing.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor2};
use crate::datagen::Dataset;
use crate::engine::adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use crate::engine::config::{TaskMode, TrainConfig};
use crate::engine::model::{compute_losses, forward_model, BatchData, ModelParams};
use crate::error::{invalid, Result};
use crate::losses::LossBreakdown;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub opt: AdamState,
    pub config: TrainConfig,
    pub epoch: usize,
    pub best_val: f64,
}

impl Checkpoint {
    pub fn init(config: &TrainConfig, d_v: usize, d_a: usize) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(d_v, d_a, config.latent_d, config.hidden_h, config.seed);
        let opt = AdamState::new(&params.tensors());
        Ok(Checkpoint {
            params,
            opt,
            config: config.clone(),
            epoch: 0,
            best_val: f64::INFINITY,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
    pub val_mae: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Deterministic 80/20 split by seeded shuffle.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_val = (n / 5).max(1).min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Gathers pooled feature rows and labels for the given sample indices.
pub fn make_batch(pooled_v: &Tensor2, pooled_a: &Tensor2, dataset: &Dataset, idx: &[usize]) -> BatchData {
    let gather = |m: &Tensor2| {
        let mut out = Tensor2::zeros(idx.len(), m.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.data[r * m.cols..(r + 1) * m.cols].copy_from_slice(m.row(i));
        }
        out
    };
    BatchData {
        xv: gather(pooled_v),
        xa: gather(pooled_a),
        y_reg: idx.iter().map(|&i| dataset.labels[i].y_reg).collect(),
        y_aux: idx.iter().map(|&i| dataset.labels[i].y_aux).collect(),
    }
}

/// One optimizer step on a batch; updates the checkpoint in place.
pub fn train_step(ckpt: &mut Checkpoint, batch: &BatchData) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let mv = ckpt.params.register(&mut tape, true);
    let fwd = forward_model(&mut tape, &mv, batch, ckpt.config.latent_d)?;
    let losses = compute_losses(&mut tape, &fwd, batch, &ckpt.config)?;
    let grads = tape.backward(losses.total);
    let grad_tensors: Vec<Tensor2> = mv.vars().iter().map(|&v| grads.grad(v)).collect();
    let mut params = ckpt.params.tensors_mut();
    adam_step(
        &mut params,
        &grad_tensors,
        &mut ckpt.opt,
        ckpt.config.learning_rate,
        ADAM_BETA1,
        ADAM_BETA2,
        ADAM_EPS,
    )?;
    Ok(losses.breakdown)
}

/// Forward-only loss evaluation on one batch.
pub fn eval_batch(params: &ModelParams, cfg: &TrainConfig, batch: &BatchData) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut tape = Tape::new();
    let mv = params.register(&mut tape, false);
    let fwd = forward_model(&mut tape, &mv, batch, cfg.latent_d)?;
    let losses = compute_losses(&mut tape, &fwd, batch, cfg)?;
    let preds = match cfg.task_mode {
        TaskMode::Regression => tape.value(fwd.task_out).data.clone(),
        TaskMode::Classification => {
            let p = tape.sigmoid(fwd.task_out);
            tape.value(p).data.clone()
        }
    };
    Ok((losses.breakdown, preds))
}

fn batch_mae(cfg: &TrainConfig, batch: &BatchData, preds: &[f64]) -> f64 {
    let targets: Vec<f64> = match cfg.task_mode {
        TaskMode::Regression => batch.y_reg.clone(),
        TaskMode::Classification => batch.y_aux.iter().map(|&v| v as f64).collect(),
    };
    targets
        .iter()
        .zip(preds)
        .map(|(y, p)| (y - p).abs())
        .sum::<f64>()
        / targets.len() as f64
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    let n = parts.len() as f64;
    let mut out = LossBreakdown::default();
    for p in parts {
        out.task += p.task;
        out.untask += p.untask;
        out.orth += p.orth;
        out.cmd += p.cmd;
        out.recon += p.recon;
        out.align += p.align;
        out.contri += p.contri;
        out.total += p.total;
    }
    out.task /= n;
    out.untask /= n;
    out.orth /= n;
    out.cmd /= n;
    out.recon /= n;
    out.align /= n;
    out.contri /= n;
    out.total /= n;
    out
}

/// Mini-batch training with early stopping on validation total loss.
/// Returns the best-validation checkpoint and the full per-epoch log.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = dataset.len();
    if n < cfg.batch_size {
        return Err(invalid(format!(
            "dataset of {n} samples is smaller than one batch of {}",
            cfg.batch_size
        )));
    }
    let (pooled_v, pooled_a) = dataset.pooled();
    let (train_idx, val_idx) = split_indices(n, cfg.seed);
    let val_batch = make_batch(&pooled_v, &pooled_a, dataset, &val_idx);

    let mut ckpt = Checkpoint::init(cfg, dataset.d_v, dataset.d_a)?;
    let (init_val, init_preds) = eval_batch(&ckpt.params, cfg, &val_batch)?;
    ckpt.best_val = init_val.total;

    let mut best = ckpt.clone();
    let mut log = Vec::new();
    log.push(EpochLog {
        epoch: 0,
        train: LossBreakdown::default(),
        val: init_val,
        val_mae: batch_mae(cfg, &val_batch, &init_preds),
    });

    let mut bad_epochs = 0usize;
    for epoch in 1..=cfg.max_epochs {
        let mut order = train_idx.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed_0000).wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        let mut batch_logs = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // CMD needs at least two rows
            }
            let batch = make_batch(&pooled_v, &pooled_a, dataset, chunk);
            batch_logs.push(train_step(&mut ckpt, &batch)?);
        }

        let (val, preds) = eval_batch(&ckpt.params, cfg, &val_batch)?;
        ckpt.epoch = epoch;
        log.push(EpochLog {
            epoch,
            train: mean_breakdown(&batch_logs),
            val,
            val_mae: batch_mae(cfg, &val_batch, &preds),
        });

        if val.total < best.best_val {
            ckpt.best_val = val.total;
            best = ckpt.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { checkpoint: best, log })
}
