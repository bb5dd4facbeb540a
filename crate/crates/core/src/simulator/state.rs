use std::fmt;

use serde::{Deserialize, Serialize};

/// Population size, or the absorbing state Delta.
///
/// `Huge` holds the natural log of a size beyond exact integer range; it only
/// arises from infinite-mean laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum PopulationState {
    Count(u64),
    Delta,
    Huge(f64),
}

impl PopulationState {
    pub fn is_zero(&self) -> bool {
        matches!(self, PopulationState::Count(0))
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, PopulationState::Delta)
    }

    /// Zero and Delta never change once reached.
    pub fn is_absorbed(&self) -> bool {
        self.is_zero() || self.is_delta()
    }

    pub fn is_alive(&self) -> bool {
        !self.is_absorbed()
    }

    /// Size as a float; `None` for Delta.
    pub fn size(&self) -> Option<f64> {
        match *self {
            PopulationState::Count(k) => Some(k as f64),
            PopulationState::Huge(ln) => Some(ln.exp()),
            PopulationState::Delta => None,
        }
    }

    /// `ln` of the size; `None` for Delta.
    pub fn ln_size(&self) -> Option<f64> {
        match *self {
            PopulationState::Count(k) => Some((k as f64).ln()),
            PopulationState::Huge(ln) => Some(ln),
            PopulationState::Delta => None,
        }
    }

    pub fn count(&self) -> Option<u64> {
        match *self {
            PopulationState::Count(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for PopulationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationState::Count(k) => write!(f, "{k}"),
            PopulationState::Delta => f.write_str("Delta"),
            PopulationState::Huge(ln) => write!(f, "exp({ln})"),
        }
    }
}
