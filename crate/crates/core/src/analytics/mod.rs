//! Closed-form quantities of the composed process.

pub mod absorption;
pub mod conditions;
pub mod constants;
pub mod laws;
pub mod limits;
pub mod pgf;

pub use absorption::{absorption_probabilities, AbsorptionProbabilities};
pub use conditions::{
    convergence_conditions, offspring_one_probability, ConvergenceConditions, TriState,
};
pub use constants::{
    composite_constants, constants_csv, constants_table, CompositeConstants, ConstantsIter,
};
pub use laws::{
    limit_law, limit_law_along, Conditioning, LawKind, LimitLawDescriptor, Scaling, TheoremId,
};
pub use limits::{
    detect_limit, limit_constants, LimitConstants, LimitValue, SequenceEvidence, DEFAULT_LIMIT_TOL,
};
pub use pgf::{
    composed_pgf, conditional_pgf, survival_and_moments, survival_from_constants, SurvivalMoments,
};
