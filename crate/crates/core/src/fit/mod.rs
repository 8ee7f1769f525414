//! Damped nonlinear least-squares machinery.
//!
//! A [`FitProblem`] bundles a residual closure, box-constrained parameters,
//! per-datum weights and convergence settings; [`least_squares`] runs a
//! Levenberg-Marquardt loop on it. Box constraints are realized by the
//! sine/sqrt parameter transforms: the optimizer works in unconstrained
//! internal coordinates, model code always sees external (physical) values.

mod lm;

pub mod counts;
pub mod resonance;

pub use counts::{fit_counts, CountFitOptions, FitMode, SfwmFit};
pub use lm::{check_jacobian, least_squares, FitProblem, FitResult, FitSettings, ParamSpec};
