//! Pairwise similarity between class exemplars and the affinity matrix
//! built from them.

mod fft;
mod fsc;
mod matrix;
mod metrics;

pub use fft::{fft_nd, fft_real, ifft_complex, ifft_nd, Spectrum};
pub use fsc::{fsc_average, fsc_curve, shell_correlations, weighted_average, Shell};
pub use matrix::{build_affinity, read_affinity, AffinityMatrix, Metric};
pub use metrics::{mean_difference, overlap_kernel, MeanDifference, VALUE_RANGE};

use thiserror::Error;

use crate::datagen::DatagenError;

#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("size error: {0}")]
    Size(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unsupported dimensionality: {0}")]
    UnsupportedDims(String),
    #[error("metric error for pair ({a}, {b}): {reason}")]
    Metric { a: String, b: String, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("affinity file error at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Data(#[from] DatagenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
