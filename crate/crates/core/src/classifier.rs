//! Regime labels from the limit constants.

use serde::{Deserialize, Serialize};

use crate::analytics::laws::TheoremId;
use crate::analytics::limits::{LimitConstants, LimitValue};
use crate::environment::{CaseLabel, ThetaModel};

/// Equality tolerance for the proper boundary of the defective rows.
pub const PROPER_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supercritical,
    AsymptoticallyDegenerate,
    Critical,
    StrictlySubcritical,
    LooselySubcritical,
    InfiniteMean,
    Defective,
    Undetermined,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Supercritical => "supercritical",
            Regime::AsymptoticallyDegenerate => "asymptotically_degenerate",
            Regime::Critical => "critical",
            Regime::StrictlySubcritical => "strictly_subcritical",
            Regime::LooselySubcritical => "loosely_subcritical",
            Regime::InfiniteMean => "infinite_mean",
            Regime::Defective => "defective",
            Regime::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    ExactFamily,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// `i`..`iv` for the infinite-mean row; `i`, `ii`, `corollary_i`,
    /// `corollary_ii` for the defective rows.
    pub sub_label: Option<String>,
    /// Limit statement the label points to, when one applies.
    pub theorem: Option<TheoremId>,
    pub basis: String,
    pub evidence: LimitConstants,
    pub confidence: Confidence,
}

fn undetermined(
    basis: impl Into<String>,
) -> (Regime, Option<&'static str>, Option<TheoremId>, String) {
    (Regime::Undetermined, None, None, basis.into())
}

fn name(v: LimitValue) -> &'static str {
    match v {
        LimitValue::Finite(_) => "finite",
        LimitValue::PosInfinity => "+inf",
        LimitValue::NegInfinity => "-inf",
        LimitValue::Oscillating => "oscillating",
        LimitValue::Undetermined => "undetermined",
    }
}

/// Regime of the model given its limits. Undetermined limits give an
/// undetermined label rather than an error.
pub fn classify(model: &ThetaModel, limits: &LimitConstants) -> RegimeLabel {
    use TheoremId::*;
    let l = limits;
    let (regime, sub, theorem, basis) = match model.case() {
        CaseLabel::A => match l.c {
            LimitValue::Finite(_) => match l.a {
                a if l.is_zero(a) => (
                    Regime::Supercritical,
                    None,
                    Some(T1),
                    "C<inf and A_n->0".into(),
                ),
                LimitValue::Finite(_) => (
                    Regime::AsymptoticallyDegenerate,
                    None,
                    Some(T2),
                    "C<inf and A_n->A in (0,inf)".into(),
                ),
                LimitValue::PosInfinity => (
                    Regime::StrictlySubcritical,
                    None,
                    Some(T4),
                    "C<inf and A_n->inf".into(),
                ),
                other => undetermined(format!("C<inf, A_n {}", name(other))),
            },
            LimitValue::PosInfinity => match l.b {
                LimitValue::PosInfinity => (
                    Regime::Critical,
                    None,
                    Some(T3),
                    "C=inf and B_n->inf".into(),
                ),
                LimitValue::Finite(_) => (
                    Regime::StrictlySubcritical,
                    None,
                    Some(T4),
                    "C=inf and B_n->B<inf".into(),
                ),
                LimitValue::Oscillating => (
                    Regime::LooselySubcritical,
                    None,
                    None,
                    "C=inf and B_n oscillates".into(),
                ),
                other => undetermined(format!("C=inf, B_n {}", name(other))),
            },
            other => undetermined(format!("C_n {}", name(other))),
        },
        CaseLabel::E => {
            let d = l.d.unwrap_or(LimitValue::Undetermined);
            if !l.a.is_determined() || l.a.is_pos_infinite() {
                undetermined(format!("A_n {}", name(l.a)))
            } else if !d.is_determined() || d.is_pos_infinite() {
                undetermined(format!("D_n {}", name(d)))
            } else {
                let (a0, d0) = (l.is_zero(l.a), l.is_zero(d));
                let (sub, t, basis) = match (a0, d0) {
                    (true, true) => ("i", T6i, "A=0 and D=0"),
                    (true, false) => ("ii", T6ii, "A=0 and D>0"),
                    (false, true) => ("iii", T6iii, "A>0 and D=0"),
                    (false, false) => ("iv", T6iv, "A>0 and D>0"),
                };
                (Regime::InfiniteMean, Some(sub), Some(t), basis.into())
            }
        }
        case => {
            if !l.a.is_determined() || l.a.is_pos_infinite() {
                undetermined(format!("A_n {}", name(l.a)))
            } else {
                let a0 = l.is_zero(l.a);
                let proper = case != CaseLabel::C
                    && model.proper_boundary_holds(model.checked_horizon(), PROPER_BOUNDARY_TOL);
                let sub = match (a0, proper) {
                    (true, false) => "i",
                    (false, false) => "ii",
                    (true, true) => "corollary_i",
                    (false, true) => "corollary_ii",
                };
                let t = match (case, a0, proper) {
                    (CaseLabel::B, true, false) => T7i,
                    (CaseLabel::B, false, false) => T7ii,
                    (CaseLabel::B, true, true) => T7Ci,
                    (CaseLabel::B, false, true) => T7Cii,
                    (CaseLabel::D, true, false) => T8i,
                    (CaseLabel::D, false, false) => T8ii,
                    (CaseLabel::D, true, true) => T8Ci,
                    (CaseLabel::D, false, true) => T8Cii,
                    (CaseLabel::F, true, false) => T9i,
                    (CaseLabel::F, false, false) => T9ii,
                    (CaseLabel::F, true, true) => T9Ci,
                    (CaseLabel::F, false, true) => T9Cii,
                    (_, true, _) => T10i,
                    (_, false, _) => T10ii,
                };
                let mut basis = String::from(if a0 { "A=0" } else { "A in (0,1)" });
                if proper {
                    basis.push_str(", proper boundary holds (q_Delta=0)");
                }
                (Regime::Defective, Some(sub), Some(t), basis)
            }
        }
    };
    let confidence =
        if model.a_seq().has_closed_form_limit() && model.c_seq().has_closed_form_limit() {
            Confidence::ExactFamily
        } else {
            Confidence::Numeric
        };
    RegimeLabel {
        regime,
        sub_label: sub.map(str::to_string),
        theorem,
        basis,
        evidence: l.clone(),
        confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::limits::{limit_constants, DEFAULT_LIMIT_TOL};
    use crate::environment::{validate_model, EnvSequence};

    fn label(theta: f64, r: f64, a: EnvSequence, c: EnvSequence) -> RegimeLabel {
        let m = validate_model(theta, r, a, c, 1 << 12).unwrap();
        let l = limit_constants(&m, 1 << 14, DEFAULT_LIMIT_TOL).unwrap();
        classify(&m, &l)
    }

    #[test]
    fn supplied_limits_follow_the_table() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 1.0 },
            EnvSequence::Constant { value: 1.0 },
            10,
        )
        .unwrap();
        let cases = [
            (
                LimitConstants::supplied(0.0, 2.0, None),
                Regime::Supercritical,
            ),
            (
                LimitConstants::supplied(0.5, 2.0, None),
                Regime::AsymptoticallyDegenerate,
            ),
            (
                LimitConstants::supplied(f64::INFINITY, 2.0, None),
                Regime::StrictlySubcritical,
            ),
            (
                LimitConstants::supplied(1.0, f64::INFINITY, None),
                Regime::Critical,
            ),
            (
                LimitConstants::supplied(0.0, f64::INFINITY, None),
                Regime::Critical,
            ),
        ];
        for (l, want) in cases {
            assert_eq!(classify(&m, &l).regime, want, "{l:?}");
        }
        let mut osc = LimitConstants::supplied(1.0, f64::INFINITY, None);
        osc.b = LimitValue::Finite(2.0);
        assert_eq!(classify(&m, &osc).regime, Regime::StrictlySubcritical);
        osc.b = LimitValue::Oscillating;
        assert_eq!(classify(&m, &osc).regime, Regime::LooselySubcritical);
        osc.b = LimitValue::Undetermined;
        assert_eq!(classify(&m, &osc).regime, Regime::Undetermined);
    }

    #[test]
    fn harmonic_linear_fractional_is_supercritical() {
        let l = label(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 2.0 },
        );
        assert_eq!(l.regime, Regime::Supercritical);
        assert_eq!(l.theorem, Some(TheoremId::T1));
    }

    #[test]
    fn alternating_is_critical() {
        let l = label(
            0.5,
            1.0,
            EnvSequence::AlternatingEx3,
            EnvSequence::AlternatingEx3,
        );
        assert_eq!(l.regime, Regime::Critical, "{}", l.basis);
        assert_eq!(l.confidence, Confidence::Numeric);
    }

    #[test]
    fn dyadic_oscillates() {
        let l = label(0.5, 1.0, EnvSequence::DyadicEx5, EnvSequence::DyadicEx5);
        assert_eq!(l.regime, Regime::LooselySubcritical, "{}", l.basis);
        let ev = &l.evidence.evidence["B"];
        assert!(ev.window_high - ev.window_low > 0.5);
    }
}
