//! The affinity-regularised VAE: encoder with (μ, log σ², pose) heads,
//! reparameterised sampling, pose-conditioned decoder, the three-term loss
//! and the training loop.

mod config;
mod loss;
mod network;
mod train;

pub use config::{ModelConfig, LOG_VAR_MAX, LOG_VAR_MIN};
pub use loss::{affinity_term, kl_term, loss_breakdown, reconstruction_term, LossBreakdown};
pub use network::{AffinityVae, ForwardPass, LatentCode};
pub use train::{epoch_log_csv, evaluate_loss, train, train_observed, EpochLog, LossVars, TrainConfig, TrainReport, TrainSample, EPOCH_LOG_HEADER};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("class `{0}` has no affinity entry")]
    Lookup(String),
    #[error("non-finite {component} loss")]
    Loss { component: &'static str },
    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Divergence { epoch: usize, batch: usize, reason: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
