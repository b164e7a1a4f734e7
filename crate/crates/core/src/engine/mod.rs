//! Training/evaluation orchestration: config, model container, Adam, the
//! training loop, metrics, ablations, probes and the gradient-check suite.

mod ablate;
mod adam;
mod config;
mod extract;
mod gradsuite;
mod metrics;
mod model;
mod probe;
mod train;

pub use ablate::{ablate, default_toggle_sets};
pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use config::{LossToggles, TaskMode, TrainConfig};
pub use extract::{extract, ExtractedFeatures};
pub use gradsuite::{run_gradcheck_suite, unpack_model, GradCheckOutcome, GRADCHECK_STEP, GRADCHECK_TOL};
pub use metrics::{evaluate, evaluate_indices, macro_f1, MetricsReport};
pub use model::{compute_losses, forward_model, BatchData, BatchLosses, ForwardVars, ModelParams, ModelVars};
pub use probe::logistic_probe_accuracy;
pub use train::{eval_batch, make_batch, split_indices, train, train_step, Checkpoint, EpochLog, TrainOutcome};
