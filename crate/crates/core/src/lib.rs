//! Quantile estimation for Markov chain Monte Carlo output.
//!
//! The crate estimates quantiles of a scalar functional of chain output and
//! attaches a Monte Carlo standard error (MCSE) and confidence interval using
//! one of three asymptotic-variance estimators:
//!
//! * batch means ([`bm`]), which pairs a batch-means estimate of the indicator
//!   variance with a kernel density estimate ([`kde`]),
//! * the subsampling bootstrap ([`sbm`]), driven by a sliding order-statistic
//!   window ([`window`]),
//! * regenerative simulation ([`regen`]) on split-chain output.
//!
//! [`bounds`] contains finite-sample error bounds and sample-size inversion,
//! [`samplers`] the two reference samplers, and [`experiment`] the replication
//! engine used to study coverage of the resulting intervals.

pub mod bm;
pub mod bounds;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kde;
pub mod regen;
pub mod rng;
pub mod samplers;
pub mod sbm;
pub mod trace;
pub mod window;

pub use error::{Error, Result};
pub use trace::{ecdf, empirical_quantile, order_statistic, Method, QuantileEstimate, QuantileSpec, ScalarTrace};
