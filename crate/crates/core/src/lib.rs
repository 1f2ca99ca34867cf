//! Inference of stage-transition gene regulatory networks from
//! stage-structured expression data with staged-death missingness.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the domain types and the structural constraints,
//! * [`simulate`] draws synthetic networks, coefficients and datasets,
//! * [`samplers`] contains the closed-form conditionals and collapsed
//!   marginal likelihoods,
//! * [`engine`] runs the Metropolis-within-partially-collapsed-Gibbs chain,
//! * [`baselines`] implements the Pearson-correlation comparators,
//! * [`harness`] provides metrics, benchmarking, subsampling and file IO.

pub mod baselines;
pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod samplers;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    Coef, Dims, ExpressionDataset, GlobalParams, IndicatorPrior, MoveKind, OperationMatrix,
    Person, PriorConfig, RegulationCoefficients, RegulatorAssignment, RegulatoryModel, TargetId,
};
