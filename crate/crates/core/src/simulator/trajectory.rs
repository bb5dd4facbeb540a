use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::replicate_rng;
use super::sampler::LawSampler;
use super::state::PopulationState;
use crate::analytics::constants::composite_constants;
use crate::environment::ThetaModel;
use crate::error::{Error, Result};
use crate::series::ThetaPgf;

pub const DEFAULT_POPULATION_CAP: u64 = 1_000_000_000;

/// One simulated path `Z_0 = 1, Z_1, ..., Z_horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<PopulationState>,
    pub tau0: Option<u64>,
    pub tau_delta: Option<u64>,
    pub tau: Option<u64>,
    pub seed: u64,
    /// Generation at which the population passed the cap; later states are
    /// not simulated.
    pub truncated_at: Option<u64>,
}

impl Trajectory {
    pub fn final_state(&self) -> PopulationState {
        *self.states.last().expect("trajectory holds Z_0")
    }

    /// `(generation, state)` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,state\n");
        for (n, s) in self.states.iter().enumerate() {
            let _ = writeln!(out, "{n},{s}");
        }
        out
    }
}

/// Offspring samplers for generations `1..=horizon`, built once and shared.
#[derive(Debug, Clone)]
pub struct GenerationLaws {
    samplers: Vec<LawSampler>,
    pub cap: u64,
}

impl GenerationLaws {
    pub fn new(model: &ThetaModel, horizon: u64) -> Result<Self> {
        let samplers = (1..=horizon)
            .map(|n| LawSampler::with_defaults(ThetaPgf::step(model, n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(GenerationLaws {
            samplers,
            cap: DEFAULT_POPULATION_CAP,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.samplers.len() as u64
    }

    /// `Z_n` from `Z_{n-1} = k`: `k` independent draws, stopping at the first
    /// Delta.
    fn step<R: Rng + ?Sized>(&self, n: u64, k: u64, rng: &mut R) -> Result<PopulationState> {
        let law = &self.samplers[(n - 1) as usize];
        let mut total: u64 = 0;
        for _ in 0..k {
            match law.sample(rng)? {
                PopulationState::Count(j) => {
                    total = total.saturating_add(j);
                    if total > self.cap {
                        return Err(Error::PopulationOverflow {
                            generation: n,
                            cap: self.cap,
                        });
                    }
                }
                PopulationState::Delta => return Ok(PopulationState::Delta),
                PopulationState::Huge(_) => {
                    return Err(Error::PopulationOverflow {
                        generation: n,
                        cap: self.cap,
                    })
                }
            }
        }
        Ok(PopulationState::Count(total))
    }

    /// Runs one path with the given random stream.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64) -> Result<Trajectory> {
        let horizon = self.horizon();
        let mut states = Vec::with_capacity(horizon as usize + 1);
        states.push(PopulationState::Count(1));
        let (mut tau0, mut tau_delta, mut truncated_at) = (None, None, None);
        for n in 1..=horizon {
            let current = states[(n - 1) as usize];
            let next = match current {
                PopulationState::Count(0) | PopulationState::Delta => current,
                PopulationState::Count(k) => match self.step(n, k, rng) {
                    Ok(s) => s,
                    Err(Error::PopulationOverflow { .. }) => {
                        truncated_at = Some(n);
                        break;
                    }
                    Err(e) => return Err(e),
                },
                PopulationState::Huge(_) => unreachable!("generational paths hold exact counts"),
            };
            if tau0.is_none() && tau_delta.is_none() {
                if next.is_zero() {
                    tau0 = Some(n);
                } else if next.is_delta() {
                    tau_delta = Some(n);
                }
            }
            states.push(next);
        }
        Ok(Trajectory {
            states,
            tau0,
            tau_delta,
            tau: tau0.or(tau_delta),
            seed,
            truncated_at,
        })
    }
}

/// Path of the process, generation by generation, from stream 0 of `seed`.
pub fn simulate_trajectory(model: &ThetaModel, horizon: u64, seed: u64) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(Error::rejected(None, "horizon must be at least 1"));
    }
    let laws = GenerationLaws::new(model, horizon)?;
    laws.run(&mut replicate_rng(seed, 0), seed)
}

/// Sampler for `Z_n` itself, built from the composite constants.
pub fn direct_sampler(model: &ThetaModel, n: u64) -> Result<LawSampler> {
    let k = composite_constants(model, n)?;
    LawSampler::with_defaults(ThetaPgf::composed(model, &k))
}

/// One draw of `Z_n` from its closed-form law, from stream 0 of `seed`.
pub fn sample_zn_direct(model: &ThetaModel, n: u64, seed: u64) -> Result<PopulationState> {
    if n < 1 {
        return Err(Error::rejected(None, "generation must be at least 1"));
    }
    direct_sampler(model, n)?.sample(&mut replicate_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{validate_model, EnvSequence};

    fn lf() -> ThetaModel {
        validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 1.0 },
            EnvSequence::Constant { value: 1.0 },
            10,
        )
        .unwrap()
    }

    #[test]
    fn determinism_and_absorption() {
        let m = lf();
        for seed in 0..50 {
            let t = simulate_trajectory(&m, 20, seed).unwrap();
            assert_eq!(t, simulate_trajectory(&m, 20, seed).unwrap());
            assert_eq!(t.states[0], PopulationState::Count(1));
            assert!(t.tau_delta.is_none());
            if let Some(tau) = t.tau {
                assert!(t.states[tau as usize..].iter().all(|s| s.is_zero()));
                assert!(t.states[..tau as usize].iter().all(|s| s.is_alive()));
            }
        }
    }

    #[test]
    fn direct_draws_repeat() {
        let m = lf();
        assert_eq!(
            sample_zn_direct(&m, 4, 99).unwrap(),
            sample_zn_direct(&m, 4, 99).unwrap()
        );
    }

    #[test]
    fn overflow_is_flagged() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 0.05 },
            EnvSequence::Constant { value: 0.95 },
            10,
        )
        .unwrap();
        let mut laws = GenerationLaws::new(&m, 40).unwrap();
        laws.cap = 1000;
        let truncated = (0..200u64)
            .filter_map(|s| laws.run(&mut replicate_rng(s, 0), s).unwrap().truncated_at)
            .count();
        assert!(truncated > 0);
    }
}
