//! Uncertainty estimators.
//!
//! Kernels live in one module per family and operate on plain trace fields.
//! [`registry`] maps stable estimator identifiers onto those kernels, gates
//! them on declared capabilities and records orientation and family.
//!
//! Every kernel returns `Result<F, EstimateError>`. [`EstimateError::Missing`]
//! is the abstention marker (an input the estimator needs is absent or the
//! score is undefined for this trace); [`EstimateError::Invalid`] flags data
//! that passed loading but cannot be scored.

pub mod blackbox;
pub mod density;
pub mod internal;
pub mod lexical;
pub mod logit;
mod params;
pub mod registry;
pub mod sample;

pub use density::DensityModels;
pub use params::{EstimatorParams, ParamError};
pub use registry::{EstimatorId, Family, Orientation, ScoringContext};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimateError {
    #[error("missing input: {0}")]
    Missing(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl EstimateError {
    pub(crate) fn missing(what: impl Into<String>) -> Self {
        EstimateError::Missing(what.into())
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        EstimateError::Invalid(what.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, EstimateError::Missing(_))
    }
}

pub type Estimate<F> = Result<F, EstimateError>;
