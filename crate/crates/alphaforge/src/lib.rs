//! File formats, reports and the command-line driver around `alphaforge-core`.
//!
//! Outputs of a command land under one directory: `tables/*.csv`,
//! `plots/*.svg`, and `runs/<command>.json` recording the config hash, seed
//! and wall-clock start and finish.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use error::{AppError, Result};
