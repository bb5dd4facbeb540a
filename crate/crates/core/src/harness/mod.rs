//! Scenario registry and numerical verification of the limit theorems.

pub mod registry;
pub mod stats;
pub mod verify;

pub use registry::{
    registry, scenario, theorem_coverage, Scenario, CLASSIFY_HORIZON, SCENARIO_IDS,
};
pub use verify::{
    error_report, run_all, summary_csv, verify_theorem, Check, CheckKind, VerificationReport,
    VerifyConfig,
};
