//! Hybrid decomposition-based forecasting for annual macro series.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure computation:
//! file formats, configuration and the command line live in the `hybridcast` crate.
#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod backtest;
pub mod baselines;
pub mod bvar;
pub mod eemd;
pub mod elasticnet;
pub mod error;
pub mod fixture;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod series;
pub mod spline;
pub mod stats;
pub mod svr;

pub use error::{Error, Result};
pub use series::{align, embed_lags, split_at_index, split_in_out, standardize, Dataset, LagMatrix, TimeSeries};
