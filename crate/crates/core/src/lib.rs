//! Simulation laboratory for dynamic pricing with covariates under
//! generalized linear demand.
//!
//! The crate is organized bottom-up:
//!
//! * [`glm`]: link functions, demand models, revenue and price optimization;
//! * [`covariates`]: i.i.d., phased and file-backed covariate streams;
//! * [`estimation`]: regularized quasi-MLE, design matrices, confidence radii;
//! * [`policies`]: UCB, Thompson sampling, certainty-equivalent, CILS, oracle;
//! * [`harness`]: trials, regret ledgers, aggregation and bound audits.

pub mod covariates;
pub mod error;
pub mod estimation;
pub mod glm;
pub mod harness;
pub mod linalg;
pub mod policies;
pub mod quadrature;

pub use error::{Error, Result};
