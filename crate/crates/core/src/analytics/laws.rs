//! Limit laws of the normalized process and the matching survival asymptotics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::constants::{constants_table, CompositeConstants};
use super::limits::{LimitConstants, LimitValue};
use crate::environment::{log_form, power_form, CaseLabel, ThetaModel};
use crate::error::{Error, Result};

/// Which limit statement a descriptor encodes. Suffix `C` marks the proper
/// sub-case of a defective row (`q_delta = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T4,
    T5i,
    T5ii,
    T6i,
    T6ii,
    T6iii,
    T6iv,
    T7i,
    T7ii,
    T7Ci,
    T7Cii,
    T8i,
    T8ii,
    T8Ci,
    T8Cii,
    T9i,
    T9ii,
    T9Ci,
    T9Cii,
    T10i,
    T10ii,
}

impl TheoremId {
    /// Main theorem number, 1 to 10.
    pub fn number(self) -> u8 {
        use TheoremId::*;
        match self {
            T1 => 1,
            T2 => 2,
            T3 => 3,
            T4 => 4,
            T5i | T5ii => 5,
            T6i | T6ii | T6iii | T6iv => 6,
            T7i | T7ii | T7Ci | T7Cii => 7,
            T8i | T8ii | T8Ci | T8Cii => 8,
            T9i | T9ii | T9Ci | T9Cii => 9,
            T10i | T10ii => 10,
        }
    }

    /// Part (i) of the defective theorems: `A = 0`, absorption is certain.
    pub fn is_vanishing_a(self) -> bool {
        use TheoremId::*;
        matches!(self, T7i | T7Ci | T8i | T8Ci | T9i | T9Ci | T10i)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    LaplaceTransform,
    Pgf,
    Cdf,
    Constant,
}

/// Normalization applied to `Z_n` before comparing with the limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    Identity,
    /// `A_n^exponent * Z_n`.
    ScaleByAPower {
        exponent: f64,
    },
    /// `B_n^exponent * Z_n`.
    ScaleByBPower {
        exponent: f64,
    },
    /// `A_n * ln Z_n`.
    LogTimesA,
}

impl Scaling {
    /// Multiplier for `Z_n` (or `ln Z_n`) at generation constants `k`.
    pub fn factor(&self, k: &CompositeConstants) -> f64 {
        match *self {
            Scaling::Identity => 1.0,
            Scaling::ScaleByAPower { exponent } => k.a_n.powf(exponent),
            Scaling::ScaleByBPower { exponent } => k.b_n.powf(exponent),
            Scaling::LogTimesA => k.a_n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    None,
    /// On `tau > n`, which is `Z_n > 0` in the proper rows.
    Survival,
    /// Restricted to `Z_n != Delta` without renormalizing.
    NotDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawDescriptor {
    pub theorem: TheoremId,
    pub kind: LawKind,
    pub conditioning: Conditioning,
    pub scaling: Scaling,
    /// `theta`, `r`, and whichever of `A`, `B`, `C`, `D`, `alpha` the law uses.
    pub parameters: BTreeMap<String, f64>,
}

impl LimitLawDescriptor {
    fn new(
        theorem: TheoremId,
        kind: LawKind,
        conditioning: Conditioning,
        scaling: Scaling,
        model: &ThetaModel,
        extra: &[(&str, f64)],
    ) -> Self {
        let mut parameters = BTreeMap::new();
        parameters.insert("theta".to_string(), model.theta());
        parameters.insert("r".to_string(), model.r());
        if let Some(alpha) = model.alpha() {
            parameters.insert("alpha".to_string(), alpha);
        }
        for (k, v) in extra {
            parameters.insert((*k).to_string(), *v);
        }
        LimitLawDescriptor {
            theorem,
            kind,
            conditioning,
            scaling,
            parameters,
        }
    }

    pub fn param(&self, name: &str) -> f64 {
        self.parameters.get(name).copied().unwrap_or(f64::NAN)
    }

    /// The limiting transform, pgf or cdf at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        use TheoremId::*;
        let theta = self.param("theta");
        let r = self.param("r");
        match self.theorem {
            T1 => 1.0 - (x.powf(-theta) + self.param("C")).powf(-1.0 / theta),
            T2 => {
                1.0 - (self.param("A") * (1.0 - x).powf(-theta) + self.param("C"))
                    .powf(-1.0 / theta)
            }
            T3 | T5i => 1.0 - (1.0 + x.powf(-theta)).powf(-1.0 / theta),
            T4 | T5ii => {
                let b = self.param("B");
                1.0 - (((1.0 - x).powf(-theta) + b) / (1.0 + b)).powf(-1.0 / theta)
            }
            T6i => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            T6ii => 1.0 - (-x.max(0.0)).exp() * self.param("D"),
            T6iii => 1.0 - (1.0 - x).powf(self.param("A")),
            T6iv => 1.0 - (1.0 - x).powf(self.param("A")) * self.param("D"),
            T7i | T7Ci | T8i | T8Ci => {
                ((r - x).powf(-theta) - r.powf(-theta)) / ((r - 1.0).powf(-theta) - r.powf(-theta))
            }
            T9i | T9Ci => (r.ln() - (r - x).ln()) / (r.ln() - (r - 1.0).ln()),
            T10i => 1.0 - (1.0 - x).powf(-theta),
            T7ii | T7Cii | T8ii | T8Cii | T10ii => {
                power_form(theta, r, self.param("A"), self.param("C"), x)
            }
            T9ii | T9Cii => log_form(r, self.param("A"), self.param("D").ln(), x),
        }
    }

    /// Theorem's asymptotic expression for `P(tau > n)` at generation `k`.
    pub fn survival_asymptotic(&self, k: &CompositeConstants) -> f64 {
        use TheoremId::*;
        let theta = self.param("theta");
        let r = self.param("r");
        match self.theorem {
            T1 | T2 => (self.param("A") + self.param("C")).powf(-1.0 / theta),
            T3 | T5i => k.c_n.powf(-1.0 / theta),
            T4 | T5ii => ((1.0 + self.param("B")) * k.a_n).powf(-1.0 / theta),
            T6i | T6ii | T6iii | T6iv => k.d_n(),
            T7i | T7Ci | T8i | T8Ci | T10i => {
                let c = self.param("C");
                let spread = if r == 1.0 {
                    -1.0
                } else {
                    (r - 1.0).powf(-theta) - r.powf(-theta)
                };
                k.a_n * spread * c.powf(-1.0 / theta - 1.0) / theta
            }
            T9i | T9Ci => (r.ln() - (r - 1.0).ln()) * k.a_n * k.d_n(),
            T7ii | T7Cii | T8ii | T8Cii | T9ii | T9Cii | T10ii => {
                self.evaluate(1.0) - self.evaluate(0.0)
            }
        }
    }

    /// Limit of `E(Z_n | tau > n)` when the theorem states one.
    pub fn conditional_mean_limit(&self) -> Option<f64> {
        use TheoremId::*;
        let theta = self.param("theta");
        let r = self.param("r");
        match self.theorem {
            T4 | T5ii => Some((1.0 + self.param("B")).powf(1.0 / theta)),
            T7i | T7Ci | T8i | T8Ci => Some(
                theta * (r - 1.0).powf(-theta - 1.0) / ((r - 1.0).powf(-theta) - r.powf(-theta)),
            ),
            T9i | T9Ci => Some(1.0 / ((r - 1.0) * (r.ln() - (r - 1.0).ln()))),
            T10i => Some(f64::INFINITY),
            _ => None,
        }
    }
}

fn require(v: LimitValue, name: &'static str) -> Result<LimitValue> {
    if v.is_determined() {
        Ok(v)
    } else {
        Err(Error::UndeterminedLimit { quantity: name })
    }
}

const COROLLARY_TOL: f64 = 1e-12;

/// Dispatches `(case, limits)` to the applicable limit theorem.
pub fn limit_law(model: &ThetaModel, limits: &LimitConstants) -> Result<LimitLawDescriptor> {
    use TheoremId::*;
    let theta = model.theta();
    let d = |t, kind, cond, scaling, extra: &[(&str, f64)]| {
        LimitLawDescriptor::new(t, kind, cond, scaling, model, extra)
    };
    let inv_theta = if theta != 0.0 { 1.0 / theta } else { f64::NAN };
    match model.case() {
        CaseLabel::A => {
            let c = require(limits.c, "C")?;
            if let LimitValue::Finite(c) = c {
                let a = require(limits.a, "A")?;
                if limits.is_zero(a) {
                    return Ok(d(
                        T1,
                        LawKind::LaplaceTransform,
                        Conditioning::None,
                        Scaling::ScaleByAPower {
                            exponent: inv_theta,
                        },
                        &[("A", 0.0), ("C", c)],
                    ));
                }
                if let LimitValue::Finite(a) = a {
                    return Ok(d(
                        T2,
                        LawKind::Pgf,
                        Conditioning::None,
                        Scaling::Identity,
                        &[("A", a), ("C", c)],
                    ));
                }
                return Ok(d(
                    T4,
                    LawKind::Pgf,
                    Conditioning::Survival,
                    Scaling::Identity,
                    &[("B", 0.0)],
                ));
            }
            match limits.b {
                LimitValue::PosInfinity => Ok(d(
                    T3,
                    LawKind::LaplaceTransform,
                    Conditioning::Survival,
                    Scaling::ScaleByBPower {
                        exponent: -inv_theta,
                    },
                    &[],
                )),
                LimitValue::Finite(b) => Ok(d(
                    T4,
                    LawKind::Pgf,
                    Conditioning::Survival,
                    Scaling::Identity,
                    &[("B", b)],
                )),
                LimitValue::Oscillating => Err(Error::NoLimitLaw(
                    "lim B_n does not exist; supply a subsequence".into(),
                )),
                _ => Err(Error::UndeterminedLimit { quantity: "B" }),
            }
        }
        CaseLabel::E => {
            let a = require(limits.a, "A")?;
            let dv = require(limits.d.unwrap_or(LimitValue::Undetermined), "D")?;
            let (a_zero, d_zero) = (limits.is_zero(a), limits.is_zero(dv));
            let (av, dv) = (
                a.finite().unwrap_or(f64::NAN),
                dv.finite().unwrap_or(f64::NAN),
            );
            Ok(match (a_zero, d_zero) {
                (true, true) => d(
                    T6i,
                    LawKind::Cdf,
                    Conditioning::Survival,
                    Scaling::LogTimesA,
                    &[],
                ),
                (true, false) => d(
                    T6ii,
                    LawKind::Cdf,
                    Conditioning::None,
                    Scaling::LogTimesA,
                    &[("D", dv)],
                ),
                (false, true) => d(
                    T6iii,
                    LawKind::Pgf,
                    Conditioning::Survival,
                    Scaling::Identity,
                    &[("A", av)],
                ),
                (false, false) => d(
                    T6iv,
                    LawKind::Pgf,
                    Conditioning::None,
                    Scaling::Identity,
                    &[("A", av), ("D", dv)],
                ),
            })
        }
        case => {
            let a = require(limits.a, "A")?;
            let a_zero = limits.is_zero(a);
            let av = if a_zero {
                0.0
            } else {
                a.finite().unwrap_or(f64::NAN)
            };
            let proper = case != CaseLabel::C
                && model.proper_boundary_holds(model.checked_horizon(), COROLLARY_TOL);
            let theorem = match (case, a_zero, proper) {
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
            let (kind, cond) = if a_zero {
                (LawKind::Pgf, Conditioning::Survival)
            } else {
                (LawKind::Pgf, Conditioning::NotDelta)
            };
            if case == CaseLabel::F {
                let dv = require(limits.d.unwrap_or(LimitValue::Undetermined), "D")?;
                let dv = dv.finite().unwrap_or(f64::NAN);
                return Ok(d(
                    theorem,
                    kind,
                    cond,
                    Scaling::Identity,
                    &[("A", av), ("D", dv)],
                ));
            }
            let c = require(limits.c, "C")?.finite().unwrap_or(f64::NAN);
            Ok(d(
                theorem,
                kind,
                cond,
                Scaling::Identity,
                &[("A", av), ("C", c)],
            ))
        }
    }
}

/// Limit of a subsequence of `B_n`: settled when its last step moves by at
/// most `tol` relative, divergent when the steps do not shrink.
fn subsequence_limit(values: &[f64], tol: f64) -> LimitValue {
    let m = values.len();
    if m < 3 {
        return LimitValue::Undetermined;
    }
    let (x0, x1, x2) = (values[m - 3], values[m - 2], values[m - 1]);
    if x2 == f64::INFINITY {
        return LimitValue::PosInfinity;
    }
    if (x2 - x1).abs() <= tol * x2.abs().max(1.0) {
        return LimitValue::Finite(x2);
    }
    let (d1, d2) = (x1 - x0, x2 - x1);
    if d1 > 0.0 && d2 >= 0.95 * d1 {
        return LimitValue::PosInfinity;
    }
    // geometric tail: Aitken extrapolation, accepted when the remaining
    // correction is itself small
    let rho = d2 / d1;
    if rho > 0.0 && rho < 0.9 {
        let rest = d2 * rho / (1.0 - rho);
        if rest.abs() <= 10.0 * tol * x2.abs().max(1.0) {
            return LimitValue::Finite(x2 + rest);
        }
    }
    LimitValue::Undetermined
}

/// Subsequence law (`T5i`/`T5ii`) along an explicit subsequence `k_n` of generations.
pub fn limit_law_along(
    model: &ThetaModel,
    indices: &[u64],
    tol: f64,
) -> Result<LimitLawDescriptor> {
    if model.case() != CaseLabel::A {
        return Err(Error::NoLimitLaw(
            "subsequential laws apply to theta in (0, 1], r = 1".into(),
        ));
    }
    let horizon = indices.iter().copied().max().unwrap_or(0);
    let table = constants_table(model, horizon)?;
    let values: Vec<f64> = indices.iter().map(|&k| table[k as usize].b_n).collect();
    let inv_theta = 1.0 / model.theta();
    match subsequence_limit(&values, tol) {
        LimitValue::PosInfinity => Ok(LimitLawDescriptor::new(
            TheoremId::T5i,
            LawKind::LaplaceTransform,
            Conditioning::Survival,
            Scaling::ScaleByBPower {
                exponent: -inv_theta,
            },
            model,
            &[],
        )),
        LimitValue::Finite(b) => Ok(LimitLawDescriptor::new(
            TheoremId::T5ii,
            LawKind::Pgf,
            Conditioning::Survival,
            Scaling::Identity,
            model,
            &[("B", b)],
        )),
        _ => Err(Error::UndeterminedLimit {
            quantity: "B along subsequence",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::limits::limit_constants;
    use crate::environment::{validate_model, EnvSequence};

    fn model(theta: f64, r: f64, a: EnvSequence, c: EnvSequence) -> ThetaModel {
        validate_model(theta, r, a, c, 100).unwrap()
    }

    fn law(m: &ThetaModel) -> LimitLawDescriptor {
        let lim = limit_constants(m, 20_000, 1e-6).unwrap();
        limit_law(m, &lim).unwrap()
    }

    #[test]
    fn theorem_one_transform() {
        let m = model(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
        );
        let l = law(&m);
        assert_eq!(l.theorem, TheoremId::T1);
        assert!((l.evaluate(1.0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn theorem_four_at_zero() {
        let m = model(
            1.0,
            1.0,
            EnvSequence::SuperharmonicEx4,
            EnvSequence::SuperharmonicEx4,
        );
        let l = law(&m);
        assert_eq!(l.theorem, TheoremId::T4);
        assert!(l.param("B").abs() < 1e-9);
        assert_eq!(l.evaluate(0.0), 0.0);
        // B = 0 gives the identity pgf
        assert!((l.evaluate(0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn theorem_nine_pgf_at_one() {
        let m = model(
            0.0,
            2.0,
            EnvSequence::Harmonic,
            EnvSequence::Constant { value: 0.5 },
        );
        let l = law(&m);
        assert_eq!(l.theorem, TheoremId::T9i);
        assert_eq!(l.evaluate(1.0), 1.0);
        let c = model(
            0.0,
            2.0,
            EnvSequence::Harmonic,
            EnvSequence::Constant { value: 1.0 },
        );
        assert_eq!(law(&c).theorem, TheoremId::T9Ci);
    }

    #[test]
    fn conditional_limits_match_finite_n() {
        // T7i: conditional pgf and mean at large n
        let m = model(
            0.5,
            2.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 0.8 },
        );
        let l = law(&m);
        assert_eq!(l.theorem, TheoremId::T7i);
        let n = 100_000;
        for s in [0.2, 0.5, 0.9] {
            let exact = crate::analytics::pgf::conditional_pgf(&m, n, s).unwrap();
            assert!((exact - l.evaluate(s)).abs() < 1e-4, "s={s}");
        }
        let sm = crate::analytics::pgf::survival_and_moments(&m, n).unwrap();
        let target = l.conditional_mean_limit().unwrap();
        assert!(((sm.mean_conditional - target) / target).abs() < 1e-3);
    }

    #[test]
    fn oscillating_b_needs_subsequence() {
        let m = model(1.0, 1.0, EnvSequence::DyadicEx5, EnvSequence::DyadicEx5);
        let lim = limit_constants(&m, 1 << 14, 1e-6).unwrap();
        assert_eq!(lim.b, LimitValue::Oscillating);
        assert!(matches!(limit_law(&m, &lim), Err(Error::NoLimitLaw(_))));
        let up: Vec<u64> = (1..=16).map(|j| 1u64 << j).collect();
        let down: Vec<u64> = (2..=16).map(|j| (1u64 << j) - 1).collect();
        assert_eq!(
            limit_law_along(&m, &up, 1e-3).unwrap().theorem,
            TheoremId::T5i
        );
        let l = limit_law_along(&m, &down, 1e-3).unwrap();
        assert_eq!(l.theorem, TheoremId::T5ii);
        assert!((l.param("B") - 1.0).abs() < 1e-3);
    }

    #[test]
    fn theorem_ten_rate_constant() {
        let m = model(
            -0.5,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 0.5 },
        );
        let l = law(&m);
        assert_eq!(l.theorem, TheoremId::T10i);
        let k = super::super::constants::composite_constants(&m, 1).unwrap();
        // alpha C^(alpha-1) A_n with alpha = 2
        let expect = 2.0 * 0.5 * k.a_n;
        assert!((l.survival_asymptotic(&k) - expect).abs() < 1e-6);
    }
}
