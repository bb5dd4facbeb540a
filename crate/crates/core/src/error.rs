use thiserror::Error;

use crate::series::Pmf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or an environment term falls outside every admissible row
    /// of the model definition.
    #[error("rejected parameter{}: {constraint}", fmt_index(*.index))]
    RejectedParameter {
        index: Option<u64>,
        constraint: String,
    },

    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    DomainError { value: f64, lo: f64, hi: f64 },

    #[error("invalid environment sequence: {0}")]
    InvalidSequence(String),

    #[error("cannot condition on survival at generation {n}: P(tau > n) = {p_alive:e}")]
    ConditioningOnNull { n: u64, p_alive: f64 },

    #[error("limit of {quantity} is undetermined at the requested horizon")]
    UndeterminedLimit { quantity: &'static str },

    #[error("no limit law: {0}")]
    NoLimitLaw(String),

    /// The series expansion ran out of budget before the tail dropped below
    /// tolerance. The partial mass function is kept for diagnostics.
    #[error("cutoff {cutoff} exceeded with tail mass {tail_mass:e} still unresolved")]
    CutoffExceeded {
        cutoff: usize,
        tail_mass: f64,
        partial: Box<Pmf>,
    },

    #[error("series coefficient {index} is negative ({value:e}); parameters are not a valid pgf")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("population exceeded cap {cap} at generation {generation}")]
    PopulationOverflow { generation: u64, cap: u64 },

    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_index(index: Option<u64>) -> String {
    match index {
        Some(n) => format!(" at n={n}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn rejected(index: Option<u64>, constraint: impl Into<String>) -> Self {
        Error::RejectedParameter {
            index,
            constraint: constraint.into(),
        }
    }
}
