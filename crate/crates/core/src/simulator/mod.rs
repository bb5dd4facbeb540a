//! Seeded simulation of the process and of `Z_n` directly.

pub mod ensemble;
pub mod rng;
pub mod sampler;
pub mod state;
pub mod trajectory;

pub use ensemble::{
    run_ensemble, run_ensemble_with, EnsembleOptions, EnsembleStats, Estimate, Mode, PgfPoint,
};
pub use rng::replicate_rng;
pub use sampler::{sample_offspring, LawSampler};
pub use state::PopulationState;
pub use trajectory::{
    direct_sampler, sample_zn_direct, simulate_trajectory, GenerationLaws, Trajectory,
    DEFAULT_POPULATION_CAP,
};
