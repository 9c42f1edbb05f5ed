//! Stochastic nonhomogeneous birth-death models for epidemic prevalence data.
//!
//! The prevalence of infected-and-detected (not yet removed) units is modelled
//! as a birth-death process whose reproduction and removal times follow
//! Burr-family survival functions. Consecutive observations are linked by the
//! Bernoulli-binomial Lagrangian transition law, which yields a conditional
//! likelihood, maximum-likelihood estimates, AIC comparisons, and the effective
//! reproduction number `R(t)`.

pub mod bdprocess;
pub mod error;
pub mod estimate;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod reproduction;
pub mod survival;

pub mod cli;

pub use bdprocess::{LawMode, TransitionLaw};
pub use error::{Error, Result};
pub use estimate::{FitOptions, FitResult, ModelTableRow};
pub use likelihood::PrevalenceSeries;
pub use model::ModelSpec;
pub use reproduction::RtSeries;
pub use survival::{Constraint, Family, Lifetime, SurvivalPair, SurvivalSpec};
