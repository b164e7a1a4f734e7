//! IDRL: two-modality disentangled representation learning with
//! individual-aware attention fusion, trained on synthetic planted-factor
//! data. Pure-Rust, double precision, CPU only.

pub mod autodiff;
pub mod datagen;
pub mod drd;
pub mod engine;
pub mod error;
pub mod iaf;
pub mod losses;

pub use autodiff::{Tape, Tensor2, Var};
pub use error::{IdrlError, Result};
