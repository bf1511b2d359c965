//! Circular City Index engine.
//!
//! Raw municipal KPI tables and mobility geometries go in; benchmark
//! scores, area sub-scores, the 0–100 index, Likert classes, descriptive
//! statistics and weight-sensitivity sweeps come out.
//!
//! The numeric kernels are generic over [`Scalar`]. The pipeline runs on
//! [`Real`] (`f64`); [`Exact`] (arbitrary-precision rationals) is used
//! wherever a property has to hold with exact equality.

// `!(x > 0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod analysis;
pub mod classify;
pub mod geokpi;
pub mod ingest;
pub mod model;
pub mod report;
pub mod scalar;
pub mod scoring;

pub use scalar::Scalar;

/// Floating-point scalar used by the pipeline.
pub type Real = f64;
/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type Classification = classify::BreaksClassification<Real>;
pub type ExactClassification = classify::BreaksClassification<Exact>;
pub type Weights = model::WeightConfig<Real>;
pub type ExactWeights = model::WeightConfig<Exact>;
pub type Scores = scoring::ScoreTable<Real>;
pub type ExactScores = scoring::ScoreTable<Exact>;
pub type Cohort = scoring::CohortStats<Real>;
pub type Index = model::IndexResult<Real>;
pub type ExactIndex = model::IndexResult<Exact>;
