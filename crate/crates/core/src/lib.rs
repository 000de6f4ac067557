//! Exact fractional-linear formulas and Monte Carlo estimators for a critical
//! branching process in an i.i.d. random environment with one immigrant per
//! generation.
//!
//! Offspring laws are geometric with mean `m = e^X`, where `X` is drawn from an
//! [`EnvironmentSpec`]. Conditional on the environment, every clan-survival
//! quantity is a closed-form functional of the associated walk `S`
//! ([`WalkFunctionals`]); the estimators average those functionals over
//! sampled environments.

pub mod clan_sim;
pub mod cli;
pub mod env_model;
pub mod error;
pub mod estimators;
pub mod exact_fl;
pub mod log_value;
pub mod oracle;
pub mod renewal;
pub mod rng;
pub mod walk;

pub use env_model::{sample_path, EnvironmentPath, EnvironmentSpec, ValidationReport};
pub use error::{Error, Result};
pub use log_value::LogValue;
pub use rng::{Purpose, StreamKey};
pub use walk::WalkFunctionals;
