//! One-bit direction-of-arrival estimation with sparse linear arrays.
//!
//! The crate covers the full pipeline: array geometry and co-array bookkeeping,
//! stochastic snapshot simulation with one-bit quantisation, the arcsine-law
//! covariance reconstruction, the fourth-order sign-moment covariance of the
//! sign sample covariance, the enhanced weighted-least-squares co-array MUSIC
//! estimator with its baselines, Cramér-Rao bounds, the closed-form asymptotic
//! error model, and a reproducible Monte-Carlo harness.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod signal;
pub mod covariance;
pub mod moments;
pub mod estimators;
pub mod bounds;
pub mod analysis;
pub mod harness;

pub use error::{DoaError, Result};
