//! Reference implementations of the four speaker-cue fusion methods.
//!
//! These operate on plain double-precision matrices so they can serve as a
//! numeric oracle for any neural implementation of the same operations.
//! A feature sequence H is T x D (one row per time step); the speaker
//! embedding e is length E. Projections are supplied as explicit weights,
//! never learned here.

use ndarray::{concatenate, Array1, Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// T x D feature sequence, T >= 1, D >= 1, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq {
    pub values: Array2<f64>,
}

impl FeatureSeq {
    pub fn new(values: Array2<f64>) -> Result<FeatureSeq, FusionError> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(FusionError::Empty("feature sequence"));
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(FusionError::NonFinite("feature sequence"));
        }
        Ok(FeatureSeq { values })
    }

    pub fn time_steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Length-E speaker embedding, E >= 1, finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding {
    pub values: Array1<f64>,
}

impl SpeakerEmbedding {
    pub fn new(values: Array1<f64>) -> Result<SpeakerEmbedding, FusionError> {
        if values.is_empty() {
            return Err(FusionError::Empty("speaker embedding"));
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(FusionError::NonFinite("speaker embedding"));
        }
        Ok(SpeakerEmbedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// An affine map e -> W e + b with W of shape D x E and b of length D.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineProjection {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl AffineProjection {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<AffineProjection, FusionError> {
        if weight.nrows() == 0 || weight.ncols() == 0 {
            return Err(FusionError::Empty("projection weight"));
        }
        if bias.len() != weight.nrows() {
            return Err(FusionError::Shape(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.nrows()
            )));
        }
        if !weight.iter().all(|x| x.is_finite()) || !bias.iter().all(|x| x.is_finite()) {
            return Err(FusionError::NonFinite("projection"));
        }
        Ok(AffineProjection { weight, bias })
    }

    /// The zero map into dimension `d_out` (bias zero), so fuse_add with it
    /// is the identity on H.
    pub fn zero(d_out: usize, e_in: usize) -> AffineProjection {
        AffineProjection {
            weight: Array2::zeros((d_out, e_in)),
            bias: Array1::zeros(d_out),
        }
    }

    /// Ignores the embedding and always yields `bias`.
    pub fn constant(bias: Array1<f64>, e_in: usize) -> AffineProjection {
        AffineProjection {
            weight: Array2::zeros((bias.len(), e_in)),
            bias,
        }
    }

    /// W = I, b = 0; requires E = D.
    pub fn identity(d: usize) -> AffineProjection {
        AffineProjection {
            weight: Array2::eye(d),
            bias: Array1::zeros(d),
        }
    }

    pub fn apply(&self, e: &SpeakerEmbedding) -> Result<Array1<f64>, FusionError> {
        if self.weight.ncols() != e.dim() {
            return Err(FusionError::Shape(format!(
                "projection expects embedding dim {}, got {}",
                self.weight.ncols(),
                e.dim()
            )));
        }
        Ok(self.weight.dot(&e.values) + &self.bias)
    }
}

/// Replicate e for every time step and append it: row t becomes [h_t, e].
pub fn fuse_concat(h: &FeatureSeq, e: &SpeakerEmbedding) -> FeatureSeq {
    let t = h.time_steps();
    let rep = Array2::from_shape_fn((t, e.dim()), |(_, j)| e.values[j]);
    let values = concatenate(Axis(1), &[h.values.view(), rep.view()])
        .expect("row counts match by construction");
    FeatureSeq { values }
}

/// h_t + (W e + b), the projection computed once and broadcast over rows.
pub fn fuse_add(
    h: &FeatureSeq,
    e: &SpeakerEmbedding,
    proj: &AffineProjection,
) -> Result<FeatureSeq, FusionError> {
    let v = projected_to(h, e, proj)?;
    Ok(FeatureSeq {
        values: &h.values + &v,
    })
}

/// h_t elementwise-times (W e + b).
pub fn fuse_multiply(
    h: &FeatureSeq,
    e: &SpeakerEmbedding,
    proj: &AffineProjection,
) -> Result<FeatureSeq, FusionError> {
    let v = projected_to(h, e, proj)?;
    Ok(FeatureSeq {
        values: &h.values * &v,
    })
}

/// Feature-wise linear modulation: gamma(e) elementwise-times h_t plus
/// beta(e), with gamma and beta both affine in e.
pub fn fuse_film(
    h: &FeatureSeq,
    e: &SpeakerEmbedding,
    gamma_proj: &AffineProjection,
    beta_proj: &AffineProjection,
) -> Result<FeatureSeq, FusionError> {
    let gamma = projected_to(h, e, gamma_proj)?;
    let beta = projected_to(h, e, beta_proj)?;
    Ok(FeatureSeq {
        values: &(&h.values * &gamma) + &beta,
    })
}

fn projected_to(
    h: &FeatureSeq,
    e: &SpeakerEmbedding,
    proj: &AffineProjection,
) -> Result<Array1<f64>, FusionError> {
    let v = proj.apply(e)?;
    if v.len() != h.dim() {
        return Err(FusionError::Shape(format!(
            "projection output dim {} does not match feature dim {}",
            v.len(),
            h.dim()
        )));
    }
    Ok(v)
}
