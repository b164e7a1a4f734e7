use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskMode {
    Regression,
    Classification,
}

/// Per-term on/off flags for ablation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossToggles {
    pub orth: bool,
    pub cmd: bool,
    pub untask: bool,
    pub align: bool,
    pub contri: bool,
    pub recon: bool,
}

impl Default for LossToggles {
    fn default() -> Self {
        LossToggles { orth: true, cmd: true, untask: true, align: true, contri: true, recon: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_margin: f64,
    pub cmd_k: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub latent_d: usize,
    pub hidden_h: usize,
    pub toggles: LossToggles,
    pub task_mode: TaskMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            alpha: 0.7,
            beta: 0.5,
            epsilon_margin: 0.05,
            cmd_k: 5,
            max_epochs: 200,
            patience: 10,
            seed: 42,
            latent_d: 8,
            hidden_h: 16,
            toggles: LossToggles::default(),
            task_mode: TaskMode::Regression,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(invalid("learning_rate must be positive"));
        }
        if self.batch_size < 2 {
            return Err(invalid("batch_size must be at least 2 (CMD needs 2 rows)"));
        }
        if self.patience < 1 {
            return Err(invalid("patience must be at least 1"));
        }
        if self.cmd_k < 2 {
            return Err(invalid("cmd_k must be at least 2"));
        }
        if self.latent_d == 0 || self.hidden_h == 0 {
            return Err(invalid("latent_d and hidden_h must be positive"));
        }
        Ok(())
    }

    /// Parses plain-text `key=value` lines on top of the defaults. Unknown
    /// keys are an error; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {lineno}: expected key=value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| invalid(format!("line {lineno}: bad value for {key}: {e}"));
            match key {
                "learning_rate" => cfg.learning_rate = value.parse().map_err(|e| bad(&e))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|e| bad(&e))?,
                "alpha" => cfg.alpha = value.parse().map_err(|e| bad(&e))?,
                "beta" => cfg.beta = value.parse().map_err(|e| bad(&e))?,
                "epsilon_margin" => cfg.epsilon_margin = value.parse().map_err(|e| bad(&e))?,
                "cmd_k" => cfg.cmd_k = value.parse().map_err(|e| bad(&e))?,
                "max_epochs" => cfg.max_epochs = value.parse().map_err(|e| bad(&e))?,
                "patience" => cfg.patience = value.parse().map_err(|e| bad(&e))?,
                "seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
                "latent_d" => cfg.latent_d = value.parse().map_err(|e| bad(&e))?,
                "hidden_h" => cfg.hidden_h = value.parse().map_err(|e| bad(&e))?,
                "task_mode" => {
                    cfg.task_mode = match value {
                        "regression" => TaskMode::Regression,
                        "classification" => TaskMode::Classification,
                        other => {
                            return Err(invalid(format!(
                                "line {lineno}: task_mode must be regression or classification, got '{other}'"
                            )))
                        }
                    }
                }
                "loss_orth" => cfg.toggles.orth = parse_toggle(value, lineno)?,
                "loss_cmd" => cfg.toggles.cmd = parse_toggle(value, lineno)?,
                "loss_untask" => cfg.toggles.untask = parse_toggle(value, lineno)?,
                "loss_align" => cfg.toggles.align = parse_toggle(value, lineno)?,
                "loss_contri" => cfg.toggles.contri = parse_toggle(value, lineno)?,
                "loss_recon" => cfg.toggles.recon = parse_toggle(value, lineno)?,
                other => return Err(invalid(format!("line {lineno}: unknown config key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_toggle(value: &str, lineno: usize) -> Result<bool> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(invalid(format!("line {lineno}: expected on/off, got '{other}'"))),
    }
}
