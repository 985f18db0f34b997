//! Unbounded density-ratio estimation through the relative density ratio
//! (estimate, truncate, transform back) and importance-weighted spectral
//! regression under covariate shift.
//!
//! The pipeline, bottom up:
//!
//! * [`kernels`]: bounded Mercer kernels and Gram matrices.
//! * [`operators`]: weighted empirical integral operators and spectral
//!   functions of them applied to kernel expansions.
//! * [`filters`]: kernel ridge regression, gradient flow and spectral cutoff
//!   filters, with a checker for the filter conditions.
//! * [`dre`]: the relative ratio estimate, its truncation and the inverse
//!   transform to the standard ratio.
//! * [`regression`]: importance-weighted spectral regression and the
//!   regularization schedules.
//! * [`scenarios`]: synthetic source/target pairs with closed-form ratios.
//! * [`metrics`]: Monte-Carlo error norms and log-log rate fits.

pub mod dre;
pub mod error;
pub mod filters;
pub mod kernels;
pub mod operators;
pub mod metrics;
pub mod points;
pub mod regression;
pub mod scenarios;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use filters::{FilterFamily, FilterSpec};
pub use kernels::KernelSpec;
pub use operators::{Factorization, KernelExpansion, OperatorRep};
pub use points::Points;
pub use dre::{DensityRatioEstimate, RelativeRatioEstimate};
pub use regression::{LabeledSample, Regressor, UnitWeights, WeightFunction};
pub use scenarios::{ScenarioKind, ScenarioSpec};
