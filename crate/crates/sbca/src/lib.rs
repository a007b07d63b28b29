//! Research framework for sentiment-aware portfolio policies.
//!
//! The crate is organized bottom-up:
//! - [`data`]: loading, alignment, splits, feature construction, synthetic panels
//! - [`env`]: the trading environment and risk-sensitive reward
//! - [`graph`]: scalar reverse-mode autodiff on a flat tape
//! - [`net`]: layers, encoders and the gated cross-modal fusion block
//! - [`agent`]: policy variants and the actor-critic training loop
//! - [`eval`]: metrics, benchmark strategies and experiment grids
//! - [`config`] and [`manifest`]: experiment configuration and artifact tracking
//! - [`cli`]: the command-line pipeline (`ingest`, `train`, `backtest`, ...)

pub mod agent;
pub mod cli;
pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod eval;
pub mod fusion_probe;
pub mod graph;
pub mod manifest;
pub mod net;
pub mod optim;

pub use error::{Error, Result};
