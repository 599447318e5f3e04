//! Neural layers with hand-written backward passes, and the Adam optimizer.
//!
//! Every layer keeps its weights in a shared [`ParameterSet`] and refers to
//! them by [`ParamId`]. Forward passes read the set; backward passes add into
//! the gradient buffers, so a mini-batch is processed by running several
//! forward/backward pairs and then a single [`AdamState::step`].

mod adam;
mod attention;
mod batchnorm;
mod dropout;
mod gru;
mod layers;
mod params;

pub use adam::{AdamConfig, AdamState};
pub(crate) use attention::zeros_like;
pub use attention::{attend, Attention, AttentionCache};
pub use batchnorm::{BatchNorm, BatchNormCache, BN_EPS, BN_MOMENTUM};
pub use dropout::{dropout_scales, embedding_dropout, row_dropout_scales};
pub use gru::{bidirectional_gru, BiGru, BiGruOutput, GruCache, GruParams};
pub use layers::{argmax, cross_entropy_backward, softmax, softmax_cross_entropy, xavier_uniform, Dense, Embedding};
pub use params::{Param, ParamId, ParameterSet};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of vocabulary (size {size})")]
    OutOfVocabulary { index: usize, size: usize },
    #[error("non-finite gradient in parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("batch normalization needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("parameter '{0}' registered twice")]
    DuplicateParameter(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Training vs. inference behaviour for dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(NnError::DimensionMismatch { what, expected, got });
    }
    Ok(())
}
