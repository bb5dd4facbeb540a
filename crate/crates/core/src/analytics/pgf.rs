use serde::{Deserialize, Serialize};

use super::constants::{composite_constants, CompositeConstants};
use crate::environment::{
    check_domain, inner_log, inner_power, log_form, power_form, CaseLabel, ThetaModel,
};
use crate::error::{Error, Result};
use crate::io::extended_float;

/// Smallest survival probability that conditioning will accept.
pub const MIN_CONDITIONING_MASS: f64 = 1e-300;

/// `F_n(s)` from precomputed constants, without domain checks.
pub fn composed_from_constants(model: &ThetaModel, k: &CompositeConstants, s: f64) -> f64 {
    if model.theta() == 0.0 {
        log_form(model.r(), k.a_n, k.log_d_n, s)
    } else {
        power_form(model.theta(), model.r(), k.a_n, k.c_n, s)
    }
}

/// `r - F_n(s)`, the part of the closed form that carries all the precision.
pub(crate) fn composed_gap(model: &ThetaModel, k: &CompositeConstants, s: f64) -> f64 {
    if model.theta() == 0.0 {
        inner_log(model.r(), k.a_n, k.log_d_n, s)
    } else if s >= model.r() && (model.theta() > 0.0 || model.r() > 1.0) {
        0.0
    } else {
        inner_power(model.theta(), model.r(), k.a_n, k.c_n, s)
    }
}

/// `F_n(s) = f_1 o ... o f_n (s)` by its closed form.
pub fn composed_pgf(model: &ThetaModel, n: u64, s: f64) -> Result<f64> {
    check_domain(s, 0.0, model.r())?;
    if n == 0 {
        return Ok(s);
    }
    let k = composite_constants(model, n)?;
    Ok(composed_from_constants(model, &k, s))
}

/// Absorption split and first moments of `Z_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalMoments {
    pub n: u64,
    /// `P(tau > n) = F_n(1) - F_n(0)`.
    pub p_alive: f64,
    /// `P(Z_n = 0) = F_n(0)`.
    pub p_zero: f64,
    /// `P(Z_n = Delta) = 1 - F_n(1)`.
    pub p_delta: f64,
    /// `E(Z_n; tau_Delta > n) = F'_n(1)`.
    #[serde(with = "extended_float")]
    pub mean_restricted: f64,
    /// `E(Z_n | tau > n)`.
    #[serde(with = "extended_float")]
    pub mean_conditional: f64,
}

/// `F'_n(1)` in closed form.
pub fn mean_restricted_from_constants(model: &ThetaModel, k: &CompositeConstants) -> f64 {
    let (theta, r) = (model.theta(), model.r());
    match model.case() {
        CaseLabel::A | CaseLabel::B | CaseLabel::D => {
            // A (A + C (r-1)^theta)^(-1/theta - 1); at r = 1 this is A^(-1/theta)
            k.a_n * (k.a_n + k.c_n * (r - 1.0).powf(theta)).powf(-1.0 / theta - 1.0)
        }
        CaseLabel::C | CaseLabel::E => f64::INFINITY,
        CaseLabel::F => k.a_n * (r - 1.0).powf(k.a_n - 1.0) * k.d_n(),
    }
}

pub fn survival_from_constants(model: &ThetaModel, k: &CompositeConstants) -> SurvivalMoments {
    let r = model.r();
    let gap0 = composed_gap(model, k, 0.0);
    let gap1 = composed_gap(model, k, 1.0);
    // differences of nearly equal gaps can dip below zero by round-off
    let p_zero = (r - gap0).max(0.0);
    let p_alive = (gap0 - gap1).max(0.0);
    let p_delta = (gap1 - (r - 1.0)).max(0.0);
    let mean_restricted = mean_restricted_from_constants(model, k);
    let mean_conditional = if p_alive > 0.0 {
        mean_restricted / p_alive
    } else {
        f64::INFINITY
    };
    SurvivalMoments {
        n: k.n,
        p_alive,
        p_zero,
        p_delta,
        mean_restricted,
        mean_conditional,
    }
}

pub fn survival_and_moments(model: &ThetaModel, n: u64) -> Result<SurvivalMoments> {
    let k = composite_constants(model, n)?;
    Ok(survival_from_constants(model, &k))
}

/// `E(s^{Z_n} | tau > n) = (F_n(s) - F_n(0)) / (F_n(1) - F_n(0))`.
pub fn conditional_from_constants(
    model: &ThetaModel,
    k: &CompositeConstants,
    s: f64,
) -> Result<f64> {
    check_domain(s, 0.0, 1.0)?;
    let gap0 = composed_gap(model, k, 0.0);
    let gap1 = composed_gap(model, k, 1.0);
    let p_alive = gap0 - gap1;
    if !(p_alive > MIN_CONDITIONING_MASS) {
        return Err(Error::ConditioningOnNull { n: k.n, p_alive });
    }
    if s == 1.0 {
        return Ok(1.0);
    }
    Ok((gap0 - composed_gap(model, k, s)) / p_alive)
}

pub fn conditional_pgf(model: &ThetaModel, n: u64, s: f64) -> Result<f64> {
    let k = composite_constants(model, n)?;
    conditional_from_constants(model, &k, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{step_pgf, validate_model, EnvSequence};

    fn lf_unit() -> ThetaModel {
        validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 1.0 },
            EnvSequence::Constant { value: 1.0 },
            10,
        )
        .unwrap()
    }

    fn iterate(model: &ThetaModel, n: u64, s: f64) -> f64 {
        (1..=n)
            .rev()
            .fold(s, |acc, i| step_pgf(model, i, acc).unwrap())
    }

    #[test]
    fn linear_fractional_composition() {
        let m = lf_unit();
        let closed = composed_pgf(&m, 4, 0.0).unwrap();
        assert!((closed - 0.8).abs() < 1e-15);
        assert!((closed - iterate(&m, 4, 0.0)).abs() < 1e-15);
        let sm = survival_and_moments(&m, 4).unwrap();
        assert!((sm.p_alive - 0.2).abs() < 1e-15);
        assert_eq!(sm.p_delta, 0.0);
    }

    #[test]
    fn one_step_equals_step_pgf() {
        let m = validate_model(
            -0.5,
            3.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.6 },
            10,
        )
        .unwrap();
        for s in [0.0, 0.3, 0.9, 1.0, 2.5] {
            let a = composed_pgf(&m, 1, s).unwrap();
            let b = step_pgf(&m, 1, s).unwrap();
            assert!((a - b).abs() < 1e-14, "s={s}");
        }
    }

    #[test]
    fn theta_zero_twice_by_hand() {
        let m = validate_model(
            0.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::Constant { value: 0.0 },
            2,
        )
        .unwrap();
        assert!(composed_pgf(&m, 2, 0.0).unwrap().abs() < 1e-15);
        let v = composed_pgf(&m, 2, 0.5).unwrap();
        assert!((v - (1.0 - 0.5f64.powf(1.0 / 3.0))).abs() < 1e-14);
        assert!((v - 0.20630).abs() < 1e-5);
    }

    #[test]
    fn mean_of_sibuya_like_case_a() {
        let m = validate_model(
            0.5,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
            3,
        )
        .unwrap();
        let sm = survival_and_moments(&m, 3).unwrap();
        assert!((sm.mean_restricted - 16.0).abs() < 1e-12);
    }

    #[test]
    fn defect_of_theta_zero_step() {
        let m = validate_model(
            0.0,
            2.0,
            EnvSequence::Constant { value: 0.5 },
            EnvSequence::Constant { value: 0.0 },
            1,
        )
        .unwrap();
        let sm = survival_and_moments(&m, 1).unwrap();
        assert!((sm.p_delta - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((sm.p_zero + sm.p_alive + sm.p_delta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_pgf_examples() {
        let m = validate_model(
            0.0,
            2.0,
            EnvSequence::Constant { value: 0.5 },
            EnvSequence::Constant { value: 1.0 },
            1,
        )
        .unwrap();
        let v = conditional_pgf(&m, 1, 0.5).unwrap();
        let expect = (2f64.sqrt() - 1.5f64.sqrt()) / (2f64.sqrt() - 1.0);
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.457418).abs() < 1e-6);
        assert_eq!(conditional_pgf(&m, 1, 0.0).unwrap(), 0.0);
        assert_eq!(conditional_pgf(&m, 1, 1.0).unwrap(), 1.0);
        assert!(conditional_pgf(&m, 1, 1.5).is_err());
    }

    #[test]
    fn conditioning_on_null_is_an_error() {
        // P(Z_3 > 0) = 1 / (A_3 + C_3) = 1 / (1 + 3e305)
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 1.0 },
            EnvSequence::Constant { value: 1e305 },
            3,
        )
        .unwrap();
        let err = conditional_pgf(&m, 3, 0.5).unwrap_err();
        assert!(matches!(err, Error::ConditioningOnNull { .. }));
    }

    #[test]
    fn derivative_forms_match_finite_differences() {
        // rows (b), (d), (f): F'_n(1) against a central difference at s = 1
        let models = [
            validate_model(
                0.5,
                2.0,
                EnvSequence::Convergent,
                EnvSequence::ProportionalC { sigma: 0.8 },
                20,
            )
            .unwrap(),
            validate_model(
                -0.5,
                2.0,
                EnvSequence::Convergent,
                EnvSequence::ProportionalC { sigma: 1.2 },
                20,
            )
            .unwrap(),
            validate_model(
                0.0,
                2.0,
                EnvSequence::Convergent,
                EnvSequence::Constant { value: 0.4 },
                20,
            )
            .unwrap(),
        ];
        let h = 1e-6;
        for m in &models {
            let k = composite_constants(m, 20).unwrap();
            let numeric = (composed_from_constants(m, &k, 1.0 + h)
                - composed_from_constants(m, &k, 1.0 - h))
                / (2.0 * h);
            let closed = mean_restricted_from_constants(m, &k);
            assert!(
                ((numeric - closed) / closed).abs() < 1e-6,
                "{:?}: {numeric} vs {closed}",
                m.case()
            );
        }
    }
}
