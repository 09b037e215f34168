//! Training, evaluation, analysis and file formats on top of `dilrnn-core`.

pub mod ablate;
pub mod analysis;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dump;
pub mod error;
pub mod mnist;
pub mod train;

pub use error::{AppError, AppResult};
