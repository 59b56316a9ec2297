//! Experiment runner: dataset generation, affinity matrices, training,
//! evaluation, sweeps and latent interpolation driven by one config file.

pub mod commands;
pub mod config;
pub mod data;
mod error;
pub mod report;

pub use error::CliError;
