//! Disentanglement module: per-modality common/specific encoders splitting
//! features into related and unrelated halves, plus self/cross decoders.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor2, Var};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    V,
    A,
}

impl Modality {
    pub fn tag(&self) -> &'static str {
        match self {
            Modality::V => "v",
            Modality::A => "a",
        }
    }
}

/// One modality's pooled feature matrix, B samples by d_m dims.
#[derive(Clone, Debug)]
pub struct FeatureBatch {
    pub modality: Modality,
    pub features: Tensor2,
    pub pooled_from_segments: usize,
}

/// Two affine layers with a tanh hidden activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayer {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
}

impl TwoLayer {
    pub fn init(d_in: usize, hidden: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        TwoLayer {
            w1: uniform_init(d_in, hidden, rng),
            b1: Tensor2::zeros(1, hidden),
            w2: uniform_init(hidden, d_out, rng),
            b2: Tensor2::zeros(1, d_out),
        }
    }

    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> TwoLayerVars {
        TwoLayerVars {
            w1: t.leaf(self.w1.clone(), requires_grad),
            b1: t.leaf(self.b1.clone(), requires_grad),
            w2: t.leaf(self.w2.clone(), requires_grad),
            b2: t.leaf(self.b2.clone(), requires_grad),
        }
    }
}

/// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
pub fn uniform_init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor2 {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor2::new(fan_in, fan_out, data)
}

#[derive(Clone, Copy)]
pub struct TwoLayerVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl TwoLayerVars {
    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let h = t.affine(x, self.w1, self.b1);
        let h = t.tanh(h);
        t.affine(h, self.w2, self.b2)
    }

    pub fn vars(&self) -> [Var; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// Encoders and decoder for one modality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityParams {
    pub enc_common: TwoLayer,
    pub enc_specific: TwoLayer,
    pub decoder: TwoLayer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrdParams {
    pub v: ModalityParams,
    pub a: ModalityParams,
    pub d_v: usize,
    pub d_a: usize,
    pub latent_d: usize,
    pub hidden_h: usize,
}

impl DrdParams {
    pub fn init<R: Rng>(d_v: usize, d_a: usize, latent_d: usize, hidden_h: usize, rng: &mut R) -> Self {
        let modality = |d_m: usize, rng: &mut R| ModalityParams {
            enc_common: TwoLayer::init(d_m, hidden_h, 2 * latent_d, rng),
            enc_specific: TwoLayer::init(d_m, hidden_h, 2 * latent_d, rng),
            decoder: TwoLayer::init(4 * latent_d, hidden_h, d_m, rng),
        };
        DrdParams {
            v: modality(d_v, rng),
            a: modality(d_a, rng),
            d_v,
            d_a,
            latent_d,
            hidden_h,
        }
    }

    pub fn modality(&self, m: Modality) -> &ModalityParams {
        match m {
            Modality::V => &self.v,
            Modality::A => &self.a,
        }
    }

    pub fn input_width(&self, m: Modality) -> usize {
        match m {
            Modality::V => self.d_v,
            Modality::A => self.d_a,
        }
    }
}

#[derive(Clone, Copy)]
pub struct ModalityVars {
    pub enc_common: TwoLayerVars,
    pub enc_specific: TwoLayerVars,
    pub decoder: TwoLayerVars,
}

impl ModalityParams {
    pub fn register(&self, t: &mut Tape, requires_grad: bool) -> ModalityVars {
        ModalityVars {
            enc_common: self.enc_common.register(t, requires_grad),
            enc_specific: self.enc_specific.register(t, requires_grad),
            decoder: self.decoder.register(t, requires_grad),
        }
    }
}

/// Tape handles for one modality's four disentangled matrices, all B x d.
#[derive(Clone, Copy)]
pub struct BundleVars {
    pub f_c: Var,
    pub f_s: Var,
    pub n_c: Var,
    pub n_s: Var,
}

/// Value-level counterpart of [`BundleVars`] for export and probing.
#[derive(Clone, Debug)]
pub struct DisentangledBundle {
    pub f_c: Tensor2,
    pub f_s: Tensor2,
    pub n_c: Tensor2,
    pub n_s: Tensor2,
}

impl DisentangledBundle {
    pub fn from_vars(t: &Tape, b: &BundleVars) -> Self {
        DisentangledBundle {
            f_c: t.value(b.f_c).clone(),
            f_s: t.value(b.f_s).clone(),
            n_c: t.value(b.n_c).clone(),
            n_s: t.value(b.n_s).clone(),
        }
    }
}

/// Runs both encoders; each 2d-wide output splits into a related first half
/// and an unrelated second half.
pub fn encode(t: &mut Tape, x: Var, mv: &ModalityVars, latent_d: usize) -> Result<BundleVars> {
    let width = t.value(x).cols;
    let expected = t.value(mv.enc_common.w1).rows;
    if width != expected {
        return Err(invalid(format!(
            "encode: batch width {width} does not match encoder input width {expected}"
        )));
    }
    let out_c = mv.enc_common.forward(t, x);
    let out_s = mv.enc_specific.forward(t, x);
    debug_assert_eq!(t.value(out_c).cols, 2 * latent_d);
    Ok(BundleVars {
        f_c: t.slice_cols(out_c, 0, latent_d),
        n_c: t.slice_cols(out_c, latent_d, latent_d),
        f_s: t.slice_cols(out_s, 0, latent_d),
        n_s: t.slice_cols(out_s, latent_d, latent_d),
    })
}

fn decode_concat(t: &mut Tape, bundle: &BundleVars, common_slot: Var, mv: &ModalityVars) -> Result<Var> {
    let d = t.value(bundle.f_c).cols;
    if t.value(common_slot).shape() != t.value(bundle.f_c).shape() {
        return Err(invalid("decode: common-slot feature shape mismatch"));
    }
    let nn = t.concat_cols(bundle.n_c, bundle.n_s);
    let nf = t.concat_cols(nn, bundle.f_s);
    let full = t.concat_cols(nf, common_slot);
    let expected = t.value(mv.decoder.w1).rows;
    if 4 * d != expected {
        return Err(invalid(format!(
            "decode: concatenated width {} does not match decoder input width {expected}",
            4 * d
        )));
    }
    Ok(mv.decoder.forward(t, full))
}

/// Decodes the modality's own features from N_c ⊕ N_s ⊕ F_s ⊕ F_c.
pub fn decode_self(t: &mut Tape, bundle: &BundleVars, mv: &ModalityVars) -> Result<Var> {
    decode_concat(t, bundle, bundle.f_c, mv)
}

/// Same as [`decode_self`] with the final slot swapped for the other
/// modality's common feature.
pub fn decode_cross(t: &mut Tape, bundle: &BundleVars, f_c_other: Var, mv: &ModalityVars) -> Result<Var> {
    decode_concat(t, bundle, f_c_other, mv)
}
