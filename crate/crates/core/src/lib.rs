//! Spatio-temporal dynamic linear model for hourly pollutant fields.
//!
//! Square-root concentrations at `n` gauged sites follow
//!
//! ```text
//! y_t = F_t x_t + nu_t,        nu_t    ~ N(0, sigma2 exp(-V / lambda))
//! x_t = x_{t-1} + omega_t,     omega_t ~ N(0, sigma2 W)
//! ```
//!
//! with a site-invariant level and site-specific 24 h and 12 h harmonics in
//! `x_t`. The crate provides:
//!
//! - [`model`]: stations, panels, the design matrix and covariance builders;
//! - [`ffbs`]: the Kalman filter and backward sampler;
//! - [`gibbs`]: the Metropolis-within-Gibbs sampler with missing-data
//!   imputation and phase sampling;
//! - [`interpolate`]: prediction and coverage at ungauged sites;
//! - [`analytic`]: closed-form predictive variances of the first-order
//!   polynomial DLM;
//! - [`synthetic`]: data simulated from the model.

pub mod analytic;
pub mod error;
pub mod ffbs;
pub mod gibbs;
pub mod interpolate;
pub mod linalg;
pub mod model;
pub mod stats;
pub mod synthetic;

pub use error::{DlmError, Result};
