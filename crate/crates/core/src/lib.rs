//! Finite-sample generalization bounds for time-series prediction.
//!
//! The crate simulates dependent sequences, computes forecastable envelopes
//! and the concentration bounds they drive, estimates Rademacher complexity
//! of autoregressive predictor classes, and assembles risk certificates of
//! the form
//!
//! ```text
//! R(g) <= training error + complexity term + sqrt(C_n^2) * sqrt(ln(1/delta) / 2)
//! ```
//!
//! together with Monte Carlo procedures that check each ingredient.

pub mod bounds;
pub mod certificate;
pub mod concentration;
pub mod error;
pub mod hypothesis;
pub mod process;
pub mod rademacher;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use process::{ProcessSpec, SamplePath};
pub use rng::RngStream;
