//! Summability conditions on the environment: the Church-Lindvall series and
//! the two series that characterize part (iv) of the `theta = 0` theorem.

use serde::{Deserialize, Serialize};

use crate::environment::{step_value, Coefficients, ThetaModel};
use crate::error::{Error, Result};
use crate::io::extended_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Holds,
    Fails,
    Undetermined,
}

/// Doubling increments shrinking at least this fast count as summable.
const SUMMABLE_RATIO: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvidence {
    #[serde(with = "extended_float")]
    pub partial_sum: f64,
    /// Sum over `(N/2^(k+1), N/2^k]`, newest last.
    pub doubling_increments: Vec<f64>,
    pub status: TriState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConditions {
    pub horizon: u64,
    pub church_lindvall: TriState,
    pub tilde_cl: TriState,
    /// `sum (1 - a_n)`, `+inf` once the series is judged divergent.
    #[serde(with = "extended_float")]
    pub sum_one_minus_a: f64,
    pub condition_a0: TriState,
    #[serde(rename = "condition_A1")]
    pub condition_a1: TriState,
    pub cl_series: SeriesEvidence,
    pub tilde_series: SeriesEvidence,
    pub a0_series: SeriesEvidence,
    pub a1_series: SeriesEvidence,
}

/// `ln p_n(1)`, the log of the probability of exactly one offspring.
fn log_p_one(theta: f64, r: f64, k: &Coefficients) -> f64 {
    let log_a = (-k.one_minus_a).ln_1p();
    if theta == 0.0 {
        // a (1 - c/r)^(1-a)
        log_a + k.one_minus_a * (k.log_gap - r.ln())
    } else {
        // a (a + c r^theta)^(-1/theta - 1)
        log_a + (-1.0 / theta - 1.0) * (k.a + k.c * r.powf(theta)).ln()
    }
}

/// `p_n(1) = f_n'(0)`.
pub fn offspring_one_probability(model: &ThetaModel, n: u64) -> Result<f64> {
    let k = model.coefficients(n)?;
    Ok(log_p_one(model.theta(), model.r(), &k).exp())
}

fn series_status(terms: &[f64]) -> SeriesEvidence {
    let n = terms.len();
    let partial_sum: f64 = terms.iter().sum();
    let mut increments = Vec::new();
    let mut hi = n;
    while hi >= 16 && increments.len() < 5 {
        let lo = hi / 2;
        increments.push(terms[lo..hi].iter().map(|t| t.abs()).sum::<f64>());
        hi = lo;
    }
    increments.reverse();
    let status = if !partial_sum.is_finite() {
        TriState::Fails
    } else if increments.len() < 3 {
        TriState::Undetermined
    } else {
        let last = increments.len() - 1;
        let ratio = |i: usize| {
            if increments[i - 1] == 0.0 {
                0.0
            } else {
                increments[i] / increments[i - 1]
            }
        };
        if increments[last] > 0.0 && ratio(last) >= SUMMABLE_RATIO {
            TriState::Fails
        } else if (1..=last).all(|i| ratio(i) <= SUMMABLE_RATIO) {
            TriState::Holds
        } else {
            TriState::Undetermined
        }
    };
    SeriesEvidence {
        partial_sum,
        doubling_increments: increments,
        status,
    }
}

pub fn convergence_conditions(model: &ThetaModel, horizon: u64) -> Result<ConvergenceConditions> {
    if horizon < 10 {
        return Err(Error::rejected(
            None,
            "convergence horizon must be at least 10",
        ));
    }
    let (theta, r) = (model.theta(), model.r());
    let cap = horizon as usize;
    let (mut cl, mut tilde, mut a0, mut a1) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    for n in 1..=horizon {
        let k = model.coefficients(n)?;
        let log_p = log_p_one(theta, r, &k);
        cl.push(-log_p.exp_m1());
        let f1 = step_value(theta, r, &k, 1.0);
        tilde.push(-(log_p - f1.ln()).exp_m1());
        a0.push(k.one_minus_a);
        // ln(1/(1 - c_n)); exact through log_gap when r = 1
        let log_inv = if r == 1.0 {
            -k.log_gap
        } else {
            -(-k.c).ln_1p()
        };
        a1.push(k.one_minus_a * log_inv);
    }
    let cl_series = series_status(&cl);
    let tilde_series = series_status(&tilde);
    let a0_series = series_status(&a0);
    let a1_series = series_status(&a1);
    let sum_one_minus_a = if a0_series.status == TriState::Fails {
        f64::INFINITY
    } else {
        a0_series.partial_sum
    };
    Ok(ConvergenceConditions {
        horizon,
        church_lindvall: cl_series.status,
        tilde_cl: tilde_series.status,
        sum_one_minus_a,
        condition_a0: a0_series.status,
        condition_a1: a1_series.status,
        cl_series,
        tilde_series,
        a0_series,
        a1_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{validate_model, EnvSequence, TailRule};

    #[test]
    fn single_step_table() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Table {
                values: vec![1.0],
                tail: TailRule::Error,
            },
            EnvSequence::Table {
                values: vec![1.0],
                tail: TailRule::Error,
            },
            1,
        )
        .unwrap();
        assert!((offspring_one_probability(&m, 1).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn church_lindvall_examples() {
        let ex2 = validate_model(
            1.0,
            1.0,
            EnvSequence::Convergent,
            EnvSequence::ProportionalC { sigma: 1.0 },
            10,
        )
        .unwrap();
        assert_eq!(
            convergence_conditions(&ex2, 10_000)
                .unwrap()
                .church_lindvall,
            TriState::Holds
        );
        let ex1 = validate_model(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
            10,
        )
        .unwrap();
        let cc = convergence_conditions(&ex1, 10_000).unwrap();
        assert_eq!(cc.church_lindvall, TriState::Fails);
        assert_eq!(cc.sum_one_minus_a, f64::INFINITY);
    }

    #[test]
    fn remark_conditions() {
        let build = |sigma| {
            validate_model(
                0.0,
                1.0,
                EnvSequence::Convergent,
                EnvSequence::ExpTailEx6 { sigma },
                10,
            )
            .unwrap()
        };
        let iv = convergence_conditions(&build(0.5), 10_000).unwrap();
        assert_eq!(
            (iv.condition_a0, iv.condition_a1),
            (TriState::Holds, TriState::Holds)
        );
        let iii = convergence_conditions(&build(1.0), 10_000).unwrap();
        assert_eq!(iii.condition_a0, TriState::Holds);
        assert_eq!(iii.condition_a1, TriState::Fails);
    }

    #[test]
    fn short_horizon_rejected() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
            1,
        )
        .unwrap();
        assert!(convergence_conditions(&m, 5).is_err());
    }
}
