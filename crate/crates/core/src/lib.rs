//! Affinity-regularised variational autoencoder.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, reverse-mode autodiff, Adam, checkpoints
//! * [`datagen`]: rotated glyphs, tetracubes, dataset splits, volume/PGM I/O
//! * [`affinity`]: FFT, Fourier shell correlation, mean difference, rotational
//!   overlap kernel and the class affinity matrix
//! * [`model`]: encoder/decoder with pose head and the three-term loss
//! * [`eval`]: latent-map classification, proximity matrices, interpolation
//!   and 2D embeddings

pub mod tensor;
pub mod datagen;
pub mod affinity;
pub mod model;
pub mod eval;
pub mod rng;
