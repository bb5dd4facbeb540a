use serde::{Deserialize, Serialize};

use super::limits::{LimitConstants, LimitValue};
use crate::environment::{CaseLabel, ThetaModel};
use crate::error::{Error, Result};

/// Eventual absorption at 0 (`q`), at Delta (`q_delta`) and at either (`total`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionProbabilities {
    pub q: f64,
    pub q_delta: f64,
    #[serde(rename = "Q")]
    pub total: f64,
}

impl AbsorptionProbabilities {
    fn new(q: f64, q_delta: f64) -> Self {
        let q = q.clamp(0.0, 1.0);
        let q_delta = q_delta.clamp(0.0, 1.0);
        AbsorptionProbabilities {
            q,
            q_delta,
            total: q + q_delta,
        }
    }
}

fn finite_or(v: LimitValue, name: &'static str) -> Result<f64> {
    match v {
        LimitValue::Finite(x) => Ok(x),
        LimitValue::PosInfinity => Ok(f64::INFINITY),
        _ => Err(Error::UndeterminedLimit { quantity: name }),
    }
}

pub fn absorption_probabilities(
    model: &ThetaModel,
    limits: &LimitConstants,
) -> Result<AbsorptionProbabilities> {
    let (theta, r) = (model.theta(), model.r());
    let case = model.case();
    if theta == 0.0 {
        let a = finite_or(limits.a, "A")?;
        let d = match limits.d {
            Some(v) => finite_or(v, "D")?,
            None => return Err(Error::UndeterminedLimit { quantity: "D" }),
        };
        if case == CaseLabel::E {
            return Ok(AbsorptionProbabilities::new(1.0 - d, 0.0));
        }
        return Ok(AbsorptionProbabilities::new(
            r - r.powf(a) * d,
            1.0 - r + (r - 1.0).powf(a) * d,
        ));
    }
    if case == CaseLabel::A {
        // P(Z_n > 0) = (A_n + C_n)^(-1/theta) and A_n + C_n >= C_n
        if limits.c.is_pos_infinite() || limits.a.is_pos_infinite() {
            return Ok(AbsorptionProbabilities::new(1.0, 0.0));
        }
        let a = finite_or(limits.a, "A")?;
        let c = finite_or(limits.c, "C")?;
        return Ok(AbsorptionProbabilities::new(
            1.0 - (a + c).powf(-1.0 / theta),
            0.0,
        ));
    }
    let a = finite_or(limits.a, "A")?;
    let c = finite_or(limits.c, "C")?;
    let inner = |s: f64| (a * (r - s).powf(-theta) + c).powf(-1.0 / theta);
    Ok(AbsorptionProbabilities::new(
        r - inner(0.0),
        1.0 - r + inner(1.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{validate_model, EnvSequence};

    fn model(theta: f64, r: f64, a: EnvSequence, c: EnvSequence) -> ThetaModel {
        validate_model(theta, r, a, c, 10).unwrap()
    }

    #[test]
    fn theta_zero_corollary() {
        let m = model(
            0.0,
            2.0,
            EnvSequence::Convergent,
            EnvSequence::Constant { value: 1.0 },
        );
        let lim = LimitConstants::supplied(1.0 / 3.0, 0.0, Some(1.0));
        let p = absorption_probabilities(&m, &lim).unwrap();
        assert!((p.q - (2.0 - 2f64.powf(1.0 / 3.0))).abs() < 1e-14);
        assert!((p.q - 0.74008).abs() < 1e-5);
        assert!(p.q_delta.abs() < 1e-15);
    }

    #[test]
    fn negative_theta_unit_r() {
        let m = model(
            -0.5,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 0.5 },
        );
        let lim = LimitConstants::supplied(0.0, 0.5, None);
        let p = absorption_probabilities(&m, &lim).unwrap();
        assert!((p.q - 0.75).abs() < 1e-15);
        assert!((p.q_delta - 0.25).abs() < 1e-15);
        assert!((p.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn supercritical_linear_fractional() {
        let m = model(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
        );
        let lim = LimitConstants::supplied(0.0, 1.0, None);
        let p = absorption_probabilities(&m, &lim).unwrap();
        assert_eq!(p.q, 0.0);
        assert_eq!(p.q_delta, 0.0);
    }

    #[test]
    fn undetermined_limits_are_errors() {
        let m = model(
            0.5,
            2.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 0.8 },
        );
        let mut lim = LimitConstants::supplied(0.0, 0.8, None);
        lim.a = LimitValue::Undetermined;
        assert!(matches!(
            absorption_probabilities(&m, &lim),
            Err(Error::UndeterminedLimit { quantity: "A" })
        ));
    }
}
