//! Galton-Watson theta-processes in a varying environment.
//!
//! The one-step generating functions form a family closed under composition,
//! so the law of `Z_n` is available in closed form through a handful of
//! composite constants. The crate builds on that: exact analytics, series
//! extraction of mass functions, a seeded simulator, a regime classifier and
//! a harness that checks the limit theorems numerically.

pub mod analytics;
pub mod classifier;
pub mod environment;
pub mod error;
pub mod harness;
pub mod io;
pub mod series;
pub mod simulator;

pub use analytics::{
    absorption_probabilities, composed_pgf, composite_constants, conditional_pgf, limit_constants,
    limit_law, survival_and_moments, AbsorptionProbabilities, CompositeConstants, LimitConstants,
    LimitLawDescriptor, LimitValue, TheoremId,
};
pub use environment::{
    step_pgf, validate_model, CaseLabel, EnvSequence, ModelSpec, TailRule, ThetaModel,
};
pub use error::{Error, Result};
pub use series::{pmf_from_theta_pgf, population_pmf, Pmf, ThetaPgf};
