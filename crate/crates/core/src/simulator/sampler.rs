//! Inverse-transform samplers for theta-family laws.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::rng::open_unit;
use super::state::PopulationState;
use crate::error::{Error, Result};
use crate::series::{PgfSeries, Pmf, ThetaPgf};

/// Tail tolerance used when tabulating a law for sampling.
pub const SAMPLER_TAIL_TOL: f64 = 1e-12;
/// Largest table a sampler builds before declaring the tail unresolved.
pub const SAMPLER_MAX_CUTOFF: usize = 1 << 13;

/// Beyond this, `ln S(k)` uses its large-`k` expansion.
const SIBUYA_EXACT_LIMIT: f64 = 1e7;
/// 2^53: the last size a `u64` count represents exactly as an `f64`.
const EXACT_INTEGER_LIMIT: f64 = 9_007_199_254_740_992.0;

/// Sampler for one law of the family.
#[derive(Debug, Clone)]
pub enum LawSampler {
    /// Tabulated cumulative weights over `0..=J`.
    Tabulated {
        defect: f64,
        cdf: Vec<f64>,
        tail: f64,
    },
    /// `1 - d (1-s)^a`: zero with probability `1 - d`, else Sibuya(`a`).
    ZeroModifiedSibuya {
        d: f64,
        a: f64,
        ln_gamma_one_minus_a: f64,
    },
    /// `theta = 1`: Delta, zero, or `1 + Geometric` with `P(X > k | X > 0) = rho^k`.
    LinearFractional { defect: f64, zero: f64, ln_rho: f64 },
    /// `theta = -1/m`, `r = 1`: expanding `(a u^(1/m) + c)^m` with `u = 1-s`
    /// gives Delta, zero, and Sibuya(`k/m`) components for `k = 1..=m`.
    SibuyaMixture {
        defect: f64,
        zero: f64,
        /// `(weight, exponent, ln Gamma(1 - exponent))` per component.
        components: Vec<(f64, f64, f64)>,
    },
}

/// Largest `m` for which `theta = -1/m` uses the exact mixture.
const MAX_MIXTURE_ORDER: f64 = 64.0;

fn sibuya_mixture(a: f64, c: f64, m: u32) -> LawSampler {
    let mf = m as f64;
    let mut binom = 1.0f64;
    let mut components = Vec::with_capacity(m as usize);
    for k in 1..=m {
        binom *= (mf - k as f64 + 1.0) / k as f64;
        let w = binom * c.powi((m - k) as i32) * a.powi(k as i32);
        let beta = k as f64 / mf;
        let lg = if k == m { 0.0 } else { ln_gamma(1.0 - beta) };
        components.push((w, beta, lg));
    }
    LawSampler::SibuyaMixture {
        defect: c.powi(m as i32),
        zero: (1.0 - (a + c).powi(m as i32)).max(0.0),
        components,
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

impl LawSampler {
    /// Builds a sampler; tables grow until the tail is below `tail_tol` or the
    /// table reaches `max_cutoff`.
    pub fn new(pgf: ThetaPgf, tail_tol: f64, max_cutoff: usize) -> Result<Self> {
        if let ThetaPgf::Log { r, a, log_d } = pgf {
            if r == 1.0 && a < 1.0 {
                return Ok(LawSampler::ZeroModifiedSibuya {
                    d: log_d.exp(),
                    a,
                    ln_gamma_one_minus_a: ln_gamma(1.0 - a),
                });
            }
        }
        if let ThetaPgf::Power { theta, r, a, c } = pgf {
            let rho = c / (a + c * r);
            if theta == 1.0 && rho < 1.0 {
                let (gap0, gap1) = (pgf.gap(0.0), pgf.gap(1.0));
                return Ok(LawSampler::LinearFractional {
                    defect: (gap1 - (r - 1.0)).max(0.0),
                    zero: r - gap0,
                    ln_rho: rho.ln(),
                });
            }
        }
        if let ThetaPgf::Power { theta, r, a, c } = pgf {
            let m = -1.0 / theta;
            if theta < 0.0 && r == 1.0 && m <= MAX_MIXTURE_ORDER && (m - m.round()).abs() < 1e-12 {
                return Ok(sibuya_mixture(a, c, m.round() as u32));
            }
        }
        let mut series = PgfSeries::new(pgf);
        let mut cutoff = 64.min(max_cutoff).max(1);
        loop {
            series.extend_to(cutoff)?;
            if series.tail() <= tail_tol || cutoff >= max_cutoff {
                break;
            }
            cutoff = (cutoff * 2).min(max_cutoff);
        }
        Ok(Self::from_pmf(&series.to_pmf()))
    }

    pub fn with_defaults(pgf: ThetaPgf) -> Result<Self> {
        Self::new(pgf, SAMPLER_TAIL_TOL, SAMPLER_MAX_CUTOFF)
    }

    pub fn from_pmf(pmf: &Pmf) -> Self {
        LawSampler::Tabulated {
            defect: pmf.defect_mass,
            cdf: cumulative(&pmf.weights),
            tail: pmf.tail_mass,
        }
    }

    pub fn defect(&self) -> f64 {
        match self {
            LawSampler::Tabulated { defect, .. } => *defect,
            LawSampler::ZeroModifiedSibuya { .. } => 0.0,
            LawSampler::LinearFractional { defect, .. } => *defect,
            LawSampler::SibuyaMixture { defect, .. } => *defect,
        }
    }

    /// One draw. A uniform landing in the unresolved tail is an error rather
    /// than being reassigned to a tabulated value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PopulationState> {
        match self {
            LawSampler::Tabulated { defect, cdf, tail } => {
                let u: f64 = rng.random();
                if u < *defect {
                    return Ok(PopulationState::Delta);
                }
                let v = u - defect;
                let idx = cdf.partition_point(|&c| c <= v);
                if idx < cdf.len() {
                    return Ok(PopulationState::Count(idx as u64));
                }
                if *tail <= 0.0 {
                    // round-off above the table total
                    return Ok(PopulationState::Count((cdf.len() - 1) as u64));
                }
                Err(Error::CutoffExceeded {
                    cutoff: cdf.len() - 1,
                    tail_mass: *tail,
                    partial: Box::new(Pmf {
                        weights: Vec::new(),
                        tail_mass: *tail,
                        defect_mass: *defect,
                        cutoff: cdf.len() - 1,
                        clipped: 0.0,
                    }),
                })
            }
            LawSampler::ZeroModifiedSibuya {
                d,
                a,
                ln_gamma_one_minus_a,
            } => {
                let u: f64 = rng.random();
                if u >= *d {
                    return Ok(PopulationState::Count(0));
                }
                Ok(sibuya_inverse(
                    *a,
                    *ln_gamma_one_minus_a,
                    open_unit(rng).ln(),
                ))
            }
            LawSampler::LinearFractional {
                defect,
                zero,
                ln_rho,
            } => {
                let u: f64 = rng.random();
                if u < *defect {
                    return Ok(PopulationState::Delta);
                }
                if u < defect + zero {
                    return Ok(PopulationState::Count(0));
                }
                if *ln_rho == f64::NEG_INFINITY {
                    return Ok(PopulationState::Count(1));
                }
                let extra = (open_unit(rng).ln() / ln_rho).floor();
                if extra + 1.0 > EXACT_INTEGER_LIMIT {
                    return Ok(PopulationState::Huge((extra + 1.0).ln()));
                }
                Ok(PopulationState::Count(extra as u64 + 1))
            }
            LawSampler::SibuyaMixture {
                defect,
                zero,
                components,
            } => {
                let u: f64 = rng.random();
                if u < *defect {
                    return Ok(PopulationState::Delta);
                }
                let mut acc = defect + zero;
                if u < acc {
                    return Ok(PopulationState::Count(0));
                }
                for &(w, beta, lg) in components {
                    acc += w;
                    if u < acc {
                        if beta == 1.0 {
                            return Ok(PopulationState::Count(1));
                        }
                        return Ok(sibuya_inverse(beta, lg, open_unit(rng).ln()));
                    }
                }
                // round-off above the total
                Ok(PopulationState::Count(1))
            }
        }
    }
}

/// `ln P(X > k)` for Sibuya(`a`): `ln G(k+1-a) - ln G(1-a) - ln G(k+1)`.
pub(crate) fn sibuya_log_survival(a: f64, ln_gamma_one_minus_a: f64, k: f64) -> f64 {
    if k < SIBUYA_EXACT_LIMIT {
        ln_gamma(k + 1.0 - a) - ln_gamma_one_minus_a - ln_gamma(k + 1.0)
    } else {
        let x = k + 1.0;
        -a * x.ln() + a * (a + 1.0) / (2.0 * x) - ln_gamma_one_minus_a
    }
}

/// Smallest `k >= 1` with `ln P(X > k) < ln_v`.
fn sibuya_inverse(a: f64, ln_gamma_one_minus_a: f64, ln_v: f64) -> PopulationState {
    // leading-order solution of -a ln k - ln G(1-a) = ln v
    let ln_guess = (-ln_v - ln_gamma_one_minus_a) / a;
    if ln_guess > EXACT_INTEGER_LIMIT.ln() {
        return PopulationState::Huge(ln_guess);
    }
    let below = |k: f64| sibuya_log_survival(a, ln_gamma_one_minus_a, k) < ln_v;
    let mut hi = ln_guess.exp().max(1.0).ceil();
    while !below(hi) {
        hi *= 2.0;
        if hi > EXACT_INTEGER_LIMIT {
            return PopulationState::Huge(ln_guess);
        }
    }
    let mut lo = 0.0f64;
    // invariant: !below(lo) (S(0) = 1 >= v), below(hi)
    while hi - lo > 1.0 {
        let mid = (0.5 * (lo + hi)).floor();
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    PopulationState::Count(hi as u64)
}

/// One draw from a tabulated mass function.
pub fn sample_offspring<R: Rng + ?Sized>(pmf: &Pmf, rng: &mut R) -> Result<PopulationState> {
    LawSampler::from_pmf(pmf).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::rng::replicate_rng;

    #[test]
    fn all_defective_mass() {
        let pmf = Pmf {
            weights: vec![0.0],
            tail_mass: 0.0,
            defect_mass: 1.0,
            cutoff: 0,
            clipped: 0.0,
        };
        let mut rng = replicate_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(
                sample_offspring(&pmf, &mut rng).unwrap(),
                PopulationState::Delta
            );
        }
    }

    #[test]
    fn degenerate_at_zero() {
        let pmf = Pmf {
            weights: vec![1.0],
            tail_mass: 0.0,
            defect_mass: 0.0,
            cutoff: 0,
            clipped: 0.0,
        };
        let mut rng = replicate_rng(1, 0);
        for _ in 0..100 {
            assert!(sample_offspring(&pmf, &mut rng).unwrap().is_zero());
        }
    }

    #[test]
    fn linear_fractional_mean() {
        let s = LawSampler::with_defaults(ThetaPgf::Power {
            theta: 1.0,
            r: 1.0,
            a: 1.0,
            c: 1.0,
        })
        .unwrap();
        let mut rng = replicate_rng(11, 0);
        let n = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.sample(&mut rng).unwrap().size().unwrap();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn linear_fractional_matches_table() {
        for (r, a, c) in [(1.0, 0.5, 0.7), (1.0, 3.0, 40.0), (2.0, 0.5, 0.4)] {
            let pgf = ThetaPgf::Power {
                theta: 1.0,
                r,
                a,
                c,
            };
            let exact = LawSampler::with_defaults(pgf).unwrap();
            assert!(matches!(exact, LawSampler::LinearFractional { .. }));
            let pmf = pgf.expand(1e-14, 1 << 16).unwrap();
            let mut rng = replicate_rng(5, 0);
            let n = 200_000;
            let mut counts = [0usize; 4];
            let mut delta = 0usize;
            for _ in 0..n {
                match exact.sample(&mut rng).unwrap() {
                    PopulationState::Delta => delta += 1,
                    PopulationState::Count(k) if k < 4 => counts[k as usize] += 1,
                    _ => {}
                }
            }
            let check = |f: usize, p: f64| {
                let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                assert!(
                    (f as f64 / n as f64 - p).abs() <= 4.0 * se,
                    "r={r} a={a} c={c}"
                );
            };
            check(delta, pmf.defect_mass);
            for k in 0..4 {
                check(counts[k], pmf.weight(k));
            }
        }
    }

    #[test]
    fn sibuya_mixture_matches_table() {
        for (theta, a, c) in [(-0.5, 0.5, 0.5), (-1.0 / 3.0, 0.3, 0.6)] {
            let pgf = ThetaPgf::Power {
                theta,
                r: 1.0,
                a,
                c,
            };
            let exact = LawSampler::with_defaults(pgf).unwrap();
            assert!(matches!(exact, LawSampler::SibuyaMixture { .. }));
            let mut series = PgfSeries::new(pgf);
            series.extend_to(8).unwrap();
            let pmf = series.to_pmf();
            let mut rng = replicate_rng(9, 0);
            let n = 200_000;
            let mut counts = [0usize; 5];
            let mut delta = 0usize;
            for _ in 0..n {
                match exact.sample(&mut rng).unwrap() {
                    PopulationState::Delta => delta += 1,
                    PopulationState::Count(k) if k < 5 => counts[k as usize] += 1,
                    _ => {}
                }
            }
            let check = |f: usize, p: f64| {
                let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                assert!((f as f64 / n as f64 - p).abs() <= 4.0 * se, "theta={theta}");
            };
            check(delta, pmf.defect_mass);
            for k in 0..5 {
                check(counts[k], pmf.weight(k));
            }
        }
    }

    #[test]
    fn sibuya_survival_matches_product() {
        // P(X > k) = prod_{j<=k} (1 - a/j)
        let a = 0.3;
        let lg = ln_gamma(1.0 - a);
        let mut prod = 1.0;
        for k in 1..=50 {
            prod *= 1.0 - a / k as f64;
            let s = sibuya_log_survival(a, lg, k as f64).exp();
            assert!((s - prod).abs() < 1e-12, "k={k}");
        }
        // both branches agree at the switch point
        let k = SIBUYA_EXACT_LIMIT;
        let exact = ln_gamma(k + 1.0 - a) - lg - ln_gamma(k + 1.0);
        let x = k + 1.0;
        let approx = -a * x.ln() + a * (a + 1.0) / (2.0 * x) - lg;
        assert!((exact - approx).abs() < 1e-9);
    }

    #[test]
    fn sibuya_frequencies() {
        let a = 0.5;
        let s = LawSampler::ZeroModifiedSibuya {
            d: 1.0,
            a,
            ln_gamma_one_minus_a: ln_gamma(1.0 - a),
        };
        let mut rng = replicate_rng(3, 0);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            if let PopulationState::Count(k) = s.sample(&mut rng).unwrap() {
                if k < 4 {
                    counts[k as usize] += 1;
                }
            }
        }
        // 1 - (1-s)^(1/2) = s/2 + s^2/8 + s^3/16 + ...
        for (k, p) in [(1usize, 0.5), (2, 0.125), (3, 0.0625)] {
            let f = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se, "k={k} f={f}");
        }
        assert_eq!(counts[0], 0);
    }

    #[test]
    fn tiny_exponent_gives_huge_sizes() {
        let a = 1.0 / 2001.0;
        let lg = ln_gamma(1.0 - a);
        match sibuya_inverse(a, lg, 0.5f64.ln()) {
            PopulationState::Huge(ln) => assert!((ln - 2001.0 * 2f64.ln()).abs() < 1.0),
            other => panic!("{other:?}"),
        }
    }
}
