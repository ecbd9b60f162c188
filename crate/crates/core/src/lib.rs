//! Trace-based uncertainty scoring for language-model generations.
//!
//! Traces are recorded offline (see [`trace`]); every estimator is a pure
//! function of one trace plus, for the training-based family, density models
//! fitted on the train split. The numeric core is generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the common double-precision case.

pub mod estimators;
pub mod linalg;
mod scalar;
pub mod synth;
pub mod trace;

pub use estimators::{DensityModels, EstimateError, EstimatorId, EstimatorParams, Family, Orientation, ScoringContext};
pub use scalar::{floored_ln, log_sum_exp, mean, Real};

pub type Trace = trace::GenerationTrace<f64>;
pub type Trace32 = trace::GenerationTrace<f32>;
pub type TokenStep = trace::TokenStep<f64>;
pub type SampleRecord = trace::SampleRecord<f64>;
pub type RelationMatrices = trace::RelationMatrices<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Models = estimators::DensityModels<f64>;
