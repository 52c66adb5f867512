//! Exact marginal likelihoods for linear-Gaussian rank and dictionary
//! models, compared against ambient-dimension BIC and RLCT-corrected scores.
//!
//! - [`linear_models`]: rank-r regression specs and seeded datasets.
//! - [`evidence`]: closed-form evidence, posterior, fit term, scores.
//! - [`rlct`]: analytic λ, `log n` slope fits, the slope estimator of λ.
//! - [`dictionary`]: subspace model, minimal/overcomplete pairs, spectra.
//! - [`oracle`]: quadrature and importance-sampling cross-checks.
//! - [`experiments`]: seed-ensemble studies and their CSV outputs.

pub mod dictionary;
pub mod error;
pub mod evidence;
pub mod experiments;
pub mod linalg;
pub mod linear_models;
pub mod oracle;
pub mod rlct;
pub mod rng;

pub use error::{Error, Result};
