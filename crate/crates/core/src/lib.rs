//! Finance-grounded training objectives and the research pipeline around them.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure transformation
//! over in-memory data: candle validation and returns, mixed-frequency feature
//! windows, evaluation metrics, differentiable losses with analytic gradients,
//! position models (linear, MLP, LSTM) trained by gradient descent, heuristic
//! alphas, a lag-correct backtester and alpha portfolio combination.
//!
//! File formats, reports and the command line live in the `alphaforge` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod alphas;
pub mod backtest;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod portfolio;
pub mod sweep;
pub mod synth;

mod stats;

pub use error::{Error, Result};
