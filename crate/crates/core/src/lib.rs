//! Backdoor adjustment discovery with an auxiliary variable.
//!
//! Given observational data on a treatment X, an outcome Y, an auxiliary
//! variable W and candidate covariates Z, the [`discovery`] module learns a
//! sparse unit-norm direction `beta` such that W is independent of Y given
//! X and `beta'Z`, while W stays dependent on Y given `beta'Z` alone. The
//! support of `beta` is the adjustment set, and [`estimation`] turns it into
//! an average treatment effect by regression adjustment.
//!
//! The [`graph`] and [`scm`] modules provide ground truth for simulations,
//! [`baselines`] the comparison estimators and [`bench`] the experiment grid.

pub mod baselines;
pub mod bench;
pub mod discovery;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod scm;
pub mod stats;

pub use error::{Error, Result};
