//! Parallel ensembles with a worker-count independent reduction.
//!
//! Replicates are grouped in fixed blocks; each block is reduced on one worker
//! and the block results are merged in block order, so the output is the same
//! bit for bit for any number of workers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::replicate_rng;
use super::sampler::LawSampler;
use super::state::PopulationState;
use super::trajectory::{direct_sampler, GenerationLaws, DEFAULT_POPULATION_CAP};
use crate::analytics::constants::composite_constants;
use crate::analytics::laws::{Conditioning, LimitLawDescriptor, Scaling};
use crate::environment::ThetaModel;
use crate::error::{Error, Result};

const BLOCK: u64 = 4096;
pub const HISTOGRAM_LEN: usize = 64;
pub const DEFAULT_PGF_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Generational,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn frequency(count: u64, total: u64) -> Self {
        if total == 0 {
            return Estimate {
                value: f64::NAN,
                se: f64::NAN,
            };
        }
        let p = count as f64 / total as f64;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / total as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgfPoint {
    pub s: f64,
    pub value: f64,
    pub se: f64,
}

/// Summary of an ensemble. Frequencies are over replicates that finished
/// without error; paths that passed the population cap count as alive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub replicates: u64,
    pub horizon: u64,
    pub mode: Mode,
    pub base_seed: u64,
    pub zero_count: u64,
    pub delta_count: u64,
    pub alive_count: u64,
    pub error_count: u64,
    pub truncated_count: u64,
    pub zero_freq: Estimate,
    pub delta_freq: Estimate,
    pub survival_freq: Estimate,
    /// `E(s^{Z_n}; Z_n != Delta)` on the grid.
    pub empirical_pgf: Vec<PgfPoint>,
    /// Counts of `Z_n = j` for `j < HISTOGRAM_LEN`.
    pub histogram: Vec<u64>,
    /// Paths with `Z_m` constant on `[n/2, n]` (generational mode only).
    pub stabilized_count: Option<u64>,
    /// Normalized values of `Z_n` following the descriptor's scaling, in
    /// replicate order.
    pub scaled_samples: Option<Vec<f64>>,
    pub errors: BTreeMap<String, u64>,
}

impl EnsembleStats {
    pub fn completed(&self) -> u64 {
        self.replicates - self.error_count
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    state: PopulationState,
    stabilized: bool,
    truncated: bool,
}

#[derive(Debug, Default)]
struct Partial {
    zero: u64,
    delta: u64,
    alive: u64,
    truncated: u64,
    stabilized: u64,
    pgf_sum: Vec<f64>,
    pgf_sq: Vec<f64>,
    histogram: Vec<u64>,
    samples: Vec<f64>,
    errors: BTreeMap<String, u64>,
}

impl Partial {
    fn new(grid: usize) -> Self {
        Partial {
            pgf_sum: vec![0.0; grid],
            pgf_sq: vec![0.0; grid],
            histogram: vec![0; HISTOGRAM_LEN],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: Partial) {
        self.zero += other.zero;
        self.delta += other.delta;
        self.alive += other.alive;
        self.truncated += other.truncated;
        self.stabilized += other.stabilized;
        for (a, b) in self.pgf_sum.iter_mut().zip(other.pgf_sum) {
            *a += b;
        }
        for (a, b) in self.pgf_sq.iter_mut().zip(other.pgf_sq) {
            *a += b;
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.samples.extend(other.samples);
        for (k, v) in other.errors {
            *self.errors.entry(k).or_default() += v;
        }
    }
}

/// How to turn a final state into a scaled sample.
#[derive(Debug, Clone, Copy)]
struct Normalizer {
    scaling: Scaling,
    factor: f64,
    survival_only: bool,
}

impl Normalizer {
    fn apply(&self, state: PopulationState) -> Option<f64> {
        if state.is_delta() || (self.survival_only && !state.is_alive()) {
            return None;
        }
        Some(match self.scaling {
            Scaling::LogTimesA => self.factor * state.ln_size()?,
            _ => match state {
                PopulationState::Huge(ln) => (ln + self.factor.ln()).exp(),
                other => self.factor * other.size()?,
            },
        })
    }
}

enum Engine {
    Generational(GenerationLaws),
    Direct(LawSampler),
}

impl Engine {
    fn outcome(&self, base_seed: u64, replicate: u64) -> Result<Outcome> {
        let mut rng = replicate_rng(base_seed, replicate);
        match self {
            Engine::Direct(sampler) => Ok(Outcome {
                state: sampler.sample(&mut rng)?,
                stabilized: false,
                truncated: false,
            }),
            Engine::Generational(laws) => {
                let path = laws.run(&mut rng, base_seed)?;
                if path.truncated_at.is_some() {
                    return Ok(Outcome {
                        state: *path.states.last().expect("Z_0 present"),
                        stabilized: false,
                        truncated: true,
                    });
                }
                let n = path.states.len() - 1;
                let last = path.states[n];
                let stabilized = path.states[n / 2..].iter().all(|s| *s == last);
                Ok(Outcome {
                    state: last,
                    stabilized,
                    truncated: false,
                })
            }
        }
    }
}

fn error_key(e: &Error) -> String {
    match e {
        Error::CutoffExceeded { .. } => "cutoff_exceeded".into(),
        Error::NegativeCoefficient { .. } => "negative_coefficient".into(),
        other => other.to_string(),
    }
}

fn run_block(
    engine: &Engine,
    base_seed: u64,
    range: std::ops::Range<u64>,
    grid: &[f64],
    normalizer: Option<Normalizer>,
) -> Partial {
    let mut p = Partial::new(grid.len());
    for replicate in range {
        let out = match engine.outcome(base_seed, replicate) {
            Ok(out) => out,
            Err(e) => {
                *p.errors.entry(error_key(&e)).or_default() += 1;
                continue;
            }
        };
        let state = out.state;
        if out.truncated {
            p.truncated += 1;
        }
        if out.stabilized {
            p.stabilized += 1;
        }
        match state {
            PopulationState::Delta => p.delta += 1,
            PopulationState::Count(0) => p.zero += 1,
            _ => p.alive += 1,
        }
        if let Some(size) = state.size() {
            if let Some(j) = state.count().filter(|_| !out.truncated) {
                if (j as usize) < HISTOGRAM_LEN {
                    p.histogram[j as usize] += 1;
                }
            }
            for (i, &s) in grid.iter().enumerate() {
                // truncated paths are above the cap: s^Z is 0 for s < 1
                let v = if s == 1.0 {
                    1.0
                } else if out.truncated || state.count().is_none() {
                    0.0
                } else {
                    s.powf(size)
                };
                p.pgf_sum[i] += v;
                p.pgf_sq[i] += v * v;
            }
        }
        if let Some(norm) = normalizer.filter(|_| !out.truncated) {
            if let Some(x) = norm.apply(state) {
                p.samples.push(x);
            }
        }
    }
    p
}

/// Knobs beyond the common arguments of `run_ensemble`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    /// Points for the empirical pgf.
    pub grid: Vec<f64>,
    /// Generational paths stop once a generation exceeds this size.
    pub population_cap: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            grid: DEFAULT_PGF_GRID.to_vec(),
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }
}

/// Simulates `replicates` independent copies of `Z_horizon`.
pub fn run_ensemble(
    model: &ThetaModel,
    horizon: u64,
    replicates: u64,
    base_seed: u64,
    workers: usize,
    mode: Mode,
    scaling: Option<&LimitLawDescriptor>,
) -> Result<EnsembleStats> {
    run_ensemble_with(
        model,
        horizon,
        replicates,
        base_seed,
        workers,
        mode,
        scaling,
        &EnsembleOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_ensemble_with(
    model: &ThetaModel,
    horizon: u64,
    replicates: u64,
    base_seed: u64,
    workers: usize,
    mode: Mode,
    scaling: Option<&LimitLawDescriptor>,
    options: &EnsembleOptions,
) -> Result<EnsembleStats> {
    let grid = options.grid.as_slice();
    if replicates < 1 {
        return Err(Error::rejected(None, "replicates must be at least 1"));
    }
    if horizon < 1 {
        return Err(Error::rejected(None, "horizon must be at least 1"));
    }
    let engine = match mode {
        Mode::Direct => Engine::Direct(direct_sampler(model, horizon)?),
        Mode::Generational => {
            let mut laws = GenerationLaws::new(model, horizon)?;
            laws.cap = options.population_cap;
            Engine::Generational(laws)
        }
    };
    let normalizer = match scaling {
        Some(law) => {
            let k = composite_constants(model, horizon)?;
            Some(Normalizer {
                scaling: law.scaling,
                factor: law.scaling.factor(&k),
                survival_only: law.conditioning == Conditioning::Survival,
            })
        }
        None => None,
    };
    let blocks: Vec<std::ops::Range<u64>> = (0..replicates.div_ceil(BLOCK))
        .map(|b| b * BLOCK..((b + 1) * BLOCK).min(replicates))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::rejected(None, format!("thread pool: {e}")))?;
    let partials: Vec<Partial> = pool.install(|| {
        blocks
            .into_par_iter()
            .map(|range| run_block(&engine, base_seed, range, grid, normalizer))
            .collect()
    });
    let mut total = Partial::new(grid.len());
    for p in partials {
        total.merge(p);
    }
    let error_count: u64 = total.errors.values().sum();
    let completed = replicates - error_count;
    let empirical_pgf = grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let n = completed.max(1) as f64;
            let mean = total.pgf_sum[i] / n;
            let var = (total.pgf_sq[i] / n - mean * mean).max(0.0);
            PgfPoint {
                s,
                value: mean,
                se: (var / n).sqrt(),
            }
        })
        .collect();
    Ok(EnsembleStats {
        replicates,
        horizon,
        mode,
        base_seed,
        zero_count: total.zero,
        delta_count: total.delta,
        alive_count: total.alive,
        error_count,
        truncated_count: total.truncated,
        zero_freq: Estimate::frequency(total.zero, completed),
        delta_freq: Estimate::frequency(total.delta, completed),
        survival_freq: Estimate::frequency(total.alive, completed),
        empirical_pgf,
        histogram: total.histogram,
        stabilized_count: (mode == Mode::Generational).then_some(total.stabilized),
        scaled_samples: normalizer.map(|_| total.samples),
        errors: total.errors,
    })
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
    fn worker_count_does_not_matter() {
        let m = lf();
        let one = run_ensemble(&m, 6, 10_000, 5, 1, Mode::Generational, None).unwrap();
        let four = run_ensemble(&m, 6, 10_000, 5, 4, Mode::Generational, None).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.zero_count + one.delta_count + one.alive_count, 10_000);
    }

    #[test]
    fn extinction_frequency_matches_closed_form() {
        let m = lf();
        let stats = run_ensemble(&m, 4, 100_000, 17, 4, Mode::Generational, None).unwrap();
        let f = stats.zero_freq;
        assert!((f.value - 0.8).abs() <= 4.0 * f.se, "{f:?}");
        let d = run_ensemble(&m, 4, 100_000, 17, 4, Mode::Direct, None).unwrap();
        assert!((d.zero_freq.value - 0.8).abs() <= 4.0 * d.zero_freq.se);
    }

    #[test]
    fn pgf_at_one_is_proper_mass() {
        let m = lf();
        let stats = run_ensemble(&m, 3, 5_000, 1, 2, Mode::Direct, None).unwrap();
        let last = stats.empirical_pgf.last().unwrap();
        assert_eq!(last.value, 1.0);
        let first = stats.empirical_pgf[0];
        assert_eq!(first.value, stats.zero_freq.value);
    }
}
