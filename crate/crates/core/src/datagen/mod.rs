//! Synthetic two-modality data with planted common/specific/nuisance
//! factors, the feature/label file formats, and the per-segment mutual
//! information diagnostic.

mod fileio;
mod mi;
mod synth;

pub use fileio::{load_dataset, load_features, load_labels, save_dataset, LoadedFeatures};
pub use mi::{first_principal_coordinate, histogram_mi, segment_mi};
pub use synth::{derive_aux_label, generate, Dataset, SampleLabels, SyntheticSpec, AUX_THRESHOLD, SCORE_MAX};
