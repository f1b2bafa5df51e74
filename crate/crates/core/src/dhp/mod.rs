//! The deep point-process order-flow model: a stacked denoising autoencoder
//! feeding a continuous-time deep LSTM whose memory cells decay along a
//! power law (or exponentially) between events, with one softplus intensity
//! head per event type.
//!
//! Training maximizes the event-stream likelihood with a Monte Carlo
//! compensator, group-regularized input weights, greedy layer-wise
//! pretraining and Adam fine-tuning with early stopping. Gradients come from
//! the in-crate reverse-mode tape ([`crate::autodiff`]) and are validated
//! against finite differences by [`grad_check`].
//!
//! Depth 1 with exponential decay and no autoencoder reproduces the neural
//! Hawkes benchmark path ([`DhpConfig::neural_hawkes`]).

mod checkpoint;
mod ctlstm;
mod embed;
mod model;
mod params;
mod predict;
mod sdae;
mod train;

pub use checkpoint::{load_model, save_model, CHECKPOINT_MAGIC};
pub use ctlstm::{CtLstmLayer, DecayMode, LayerStateValues};
pub use embed::{embed_dim, FeatureNorm, Stream, StreamEvent};
pub use model::{DhpConfig, DhpModel, ModelRuntime};
pub use params::{ParamStore, SegId};
pub use predict::{predict_next, Prediction};
pub use sdae::{sdae_pretrain, PretrainConfig, SdaeActivation, SdaeLayer};
pub use train::{
    grad_check, l21_rows, loss_value, regularizer, train, EpochStats, GradCheckReport,
    TrainConfig, TrainHistory,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DhpError {
    #[error("event stream must be strictly increasing (index {0})")]
    UnsortedStream(usize),
    #[error("event type {0} out of range for alphabet {1}")]
    BadEventType(usize, usize),
    #[error("stream extends past its horizon")]
    HorizonTooShort,
    #[error("input width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("no training data")]
    NoData,
    #[error("non-finite loss encountered")]
    Diverged,
    #[error("checkpoint i/o: {0}")]
    Checkpoint(String),
}
