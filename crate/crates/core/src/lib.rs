//! Monthly natural-gas demand forecasting with just-in-time-learning
//! Gaussian process regression.
//!
//! The crate covers the whole pipeline: grid indexing ([`timegrid`]),
//! reconstruction of delayed summer meter readings ([`correction`]), the
//! local GP forecaster and its window tuning ([`jitl`], [`gpr`]), benchmark
//! time-series models ([`benchmarks`]), accuracy metrics ([`metrics`]) and a
//! seeded synthetic data generator ([`synth`]).

pub mod benchmarks;
pub mod correction;
pub mod error;
pub mod gpr;
pub mod jitl;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod synth;
pub mod timegrid;

pub use error::{Error, Result};
pub use timegrid::{MonthlySeries, YearMonth};
