use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::engine::config::TaskMode;
use crate::engine::train::{eval_batch, make_batch, Checkpoint};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
}

/// Macro-averaged F1 over the two classes.
pub fn macro_f1(pred: &[u8], truth: &[u8]) -> f64 {
    let mut f1_sum = 0.0;
    for class in [0u8, 1u8] {
        let tp = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == class && t == class)
            .count() as f64;
        let fp = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == class && t != class)
            .count() as f64;
        let fne = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p != class && t == class)
            .count() as f64;
        let denom = 2.0 * tp + fp + fne;
        f1_sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    }
    f1_sum / 2.0
}

/// MAE/RMSE of the task head over the listed samples; classification mode
/// additionally thresholds the sigmoid head at 0.5.
pub fn evaluate_indices(ckpt: &Checkpoint, dataset: &Dataset, idx: &[usize]) -> Result<MetricsReport> {
    if idx.is_empty() {
        return Err(invalid("evaluate: empty dataset"));
    }
    let (pooled_v, pooled_a) = dataset.pooled();
    let batch = make_batch(&pooled_v, &pooled_a, dataset, idx);
    let (_, preds) = eval_batch(&ckpt.params, &ckpt.config, &batch)?;

    let targets: Vec<f64> = match ckpt.config.task_mode {
        TaskMode::Regression => batch.y_reg.clone(),
        TaskMode::Classification => batch.y_aux.iter().map(|&v| v as f64).collect(),
    };
    let n = targets.len() as f64;
    let mae = targets.iter().zip(&preds).map(|(y, p)| (y - p).abs()).sum::<f64>() / n;
    let rmse = (targets
        .iter()
        .zip(&preds)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        / n)
        .sqrt();

    let (accuracy, macro_f1_val) = match ckpt.config.task_mode {
        TaskMode::Regression => (None, None),
        TaskMode::Classification => {
            let hard: Vec<u8> = preds.iter().map(|&p| u8::from(p >= 0.5)).collect();
            let acc = hard
                .iter()
                .zip(&batch.y_aux)
                .filter(|&(&p, &t)| p == t)
                .count() as f64
                / n;
            (Some(acc), Some(macro_f1(&hard, &batch.y_aux)))
        }
    };
    Ok(MetricsReport { mae, rmse, accuracy, macro_f1: macro_f1_val })
}

pub fn evaluate(ckpt: &Checkpoint, dataset: &Dataset) -> Result<MetricsReport> {
    let idx: Vec<usize> = (0..dataset.len()).collect();
    evaluate_indices(ckpt, dataset, &idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macro_f1_perfect_prediction() {
        let y = [0, 1, 0, 1, 1];
        assert_eq!(macro_f1(&y, &y), 1.0);
    }

    #[test]
    fn macro_f1_all_wrong() {
        let p = [1u8, 0, 1];
        let t = [0u8, 1, 0];
        assert_eq!(macro_f1(&p, &t), 0.0);
    }
}
