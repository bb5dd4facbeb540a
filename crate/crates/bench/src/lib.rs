//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use gwtheta_core::harness::scenario;
use gwtheta_core::ThetaModel;

/// Registry model with default parameters.
pub fn model(id: &str) -> ThetaModel {
    scenario(id, &BTreeMap::new())
        .unwrap_or_else(|e| panic!("{id}: {e}"))
        .model
}

/// One model per row of the parameter table, closed-form samplers and
/// tabulated ones alike.
pub const KERNEL_SCENARIOS: [&str; 6] = ["Ex1", "Ex6i", "Ex6iv", "Ex7i", "Ex9i", "Ex10i"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        for id in KERNEL_SCENARIOS {
            model(id);
        }
    }
}
