//! Model parameters, environment sequences and the one-step generating
//! functions of a theta-process.
//!
//! A model is fixed by `(theta, r)` together with two index-addressable
//! sequences `a_n > 0` and `c_n >= 0`. The pair `(theta, r)` selects one of six
//! admissible parameter rows, labelled `a` through `f`:
//!
//! | row | theta      | r     | a_n           | c_n                                              |
//! |-----|------------|-------|---------------|--------------------------------------------------|
//! | a   | (0, 1]     | 1     | (0, inf)      | c_n > 0, c_n >= 1 - a_n                          |
//! | b   | (0, 1]     | > 1   | (0, 1)        | (1-a_n) r^-theta <= c_n <= (1-a_n)(r-1)^-theta   |
//! | c   | (-1, 0)    | 1     | (0, 1)        | 0 < c_n <= 1 - a_n                               |
//! | d   | (-1, 0)    | > 1   | (0, 1)        | (1-a_n)(r-1)^-theta <= c_n <= (1-a_n) r^-theta   |
//! | e   | 0          | 1     | (0, 1)        | 0 <= c_n < 1                                     |
//! | f   | 0          | > 1   | (0, 1)        | 0 <= c_n <= 1                                    |
//!
//! For `theta != 0` the one-step pgf is `f(s) = r - (a (r-s)^-theta + c)^(-1/theta)`,
//! and for `theta = 0` it is `f(s) = r - (r-c)^(1-a) (r-s)^a`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to the closed interval bounds on `c_n`.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// Horizon used when a model is deserialized without an explicit one.
pub const DEFAULT_CHECK_HORIZON: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseLabel {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl CaseLabel {
    /// Row selected by `(theta, r)` alone.
    pub fn classify(theta: f64, r: f64) -> Result<Self> {
        if !theta.is_finite() || !r.is_finite() {
            return Err(Error::rejected(None, "theta and r must be finite"));
        }
        if theta == -1.0 {
            return Err(Error::rejected(None, "theta = -1 is excluded"));
        }
        if theta <= -1.0 || theta > 1.0 {
            return Err(Error::rejected(
                None,
                format!("theta = {theta} outside (-1, 1]"),
            ));
        }
        if r < 1.0 {
            return Err(Error::rejected(None, format!("r = {r} below 1")));
        }
        let unit = r == 1.0;
        Ok(match (theta.partial_cmp(&0.0).unwrap(), unit) {
            (std::cmp::Ordering::Greater, true) => CaseLabel::A,
            (std::cmp::Ordering::Greater, false) => CaseLabel::B,
            (std::cmp::Ordering::Less, true) => CaseLabel::C,
            (std::cmp::Ordering::Less, false) => CaseLabel::D,
            (std::cmp::Ordering::Equal, true) => CaseLabel::E,
            (std::cmp::Ordering::Equal, false) => CaseLabel::F,
        })
    }

    /// Cases whose one-step laws are always proper.
    pub fn always_proper(self) -> bool {
        matches!(self, CaseLabel::A | CaseLabel::E)
    }

    pub fn letter(self) -> char {
        match self {
            CaseLabel::A => 'a',
            CaseLabel::B => 'b',
            CaseLabel::C => 'c',
            CaseLabel::D => 'd',
            CaseLabel::E => 'e',
            CaseLabel::F => 'f',
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.letter())
    }
}

/// What a `table` sequence does past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    RepeatLast,
    Error,
}

/// An environment sequence: the value at index `n` is a pure function of the
/// family, its parameters and `n`.
///
/// Families that describe `c_n` in terms of `a_n` (`proportional_c`,
/// `negative_proportional_c`) are only meaningful in the `c` slot. The
/// examples with paired constructions (`alternating_ex3`, `superharmonic_ex4`,
/// `dyadic_ex5`) yield the `a` or `c` member depending on the slot they occupy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub enum EnvSequence {
    /// `a_n = n / (n+1)`, so `A_n = 1 / (n+1)`.
    Harmonic,
    /// `a_n = n (n+3) / ((n+1)(n+2))`, so `A_n = (n+3) / (3(n+1))`.
    Convergent,
    /// `c_n = (1 - a_n) sigma`.
    ProportionalC {
        sigma: f64,
    },
    /// `c_n = (a_n - 1) sigma`.
    NegativeProportionalC {
        sigma: f64,
    },
    /// `a_1 = 1/2, a_2n = 4, a_2n+1 = 1/4`; `c_2n-1 = 1, c_2n = 2`.
    AlternatingEx3,
    /// `a_n = (n+1)/n`; `c_n = 1/(n^2 (n+1))`.
    SuperharmonicEx4,
    /// Dyadic construction: `a_n = n` at `n = 2^k - 1`, `1/(n-1)` at `n = 2^k`,
    /// else 1; `c_n = 1` at `n = 2^k, k > 1`, else `1/n^2`.
    DyadicEx5,
    /// `c_n = 1 - exp(-n^sigma)`.
    ExpTailEx6 {
        sigma: f64,
    },
    Constant {
        value: f64,
    },
    Table {
        values: Vec<f64>,
        tail: TailRule,
    },
}

/// `a_n` together with `1 - a_n` evaluated without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ATerm {
    pub value: f64,
    pub complement: f64,
}

impl ATerm {
    fn from_value(value: f64) -> Self {
        ATerm {
            value,
            complement: 1.0 - value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CTerm {
    pub value: f64,
    /// `ln(r - c_n)`, exact for families whose gap is known in log form.
    pub log_gap: f64,
}

fn is_power_of_two(n: u64) -> bool {
    n != 0 && n & (n - 1) == 0
}

impl EnvSequence {
    pub fn family_name(&self) -> &'static str {
        match self {
            EnvSequence::Harmonic => "harmonic",
            EnvSequence::Convergent => "convergent",
            EnvSequence::ProportionalC { .. } => "proportional_c",
            EnvSequence::NegativeProportionalC { .. } => "negative_proportional_c",
            EnvSequence::AlternatingEx3 => "alternating_ex3",
            EnvSequence::SuperharmonicEx4 => "superharmonic_ex4",
            EnvSequence::DyadicEx5 => "dyadic_ex5",
            EnvSequence::ExpTailEx6 { .. } => "exp_tail_ex6",
            EnvSequence::Constant { .. } => "constant",
            EnvSequence::Table { .. } => "table",
        }
    }

    /// True for families whose product `A_n` has a known closed-form limit.
    pub fn has_closed_form_limit(&self) -> bool {
        matches!(
            self,
            EnvSequence::Harmonic | EnvSequence::Convergent | EnvSequence::Constant { .. }
        )
    }

    fn table_value(values: &[f64], tail: TailRule, n: u64) -> Result<f64> {
        let idx = (n - 1) as usize;
        match values.get(idx) {
            Some(v) => Ok(*v),
            None => match tail {
                TailRule::RepeatLast => values
                    .last()
                    .copied()
                    .ok_or_else(|| Error::InvalidSequence("empty table".into())),
                TailRule::Error => Err(Error::InvalidSequence(format!(
                    "table has {} entries, index {n} requested",
                    values.len()
                ))),
            },
        }
    }

    /// Value of the sequence in the `a` slot at index `n >= 1`.
    pub fn a_term(&self, n: u64) -> Result<ATerm> {
        if n == 0 {
            return Err(Error::InvalidSequence(
                "sequences are indexed from 1".into(),
            ));
        }
        let nf = n as f64;
        Ok(match self {
            EnvSequence::Harmonic => ATerm {
                value: nf / (nf + 1.0),
                complement: 1.0 / (nf + 1.0),
            },
            EnvSequence::Convergent => ATerm {
                value: nf * (nf + 3.0) / ((nf + 1.0) * (nf + 2.0)),
                complement: 2.0 / ((nf + 1.0) * (nf + 2.0)),
            },
            EnvSequence::AlternatingEx3 => match n {
                1 => ATerm::from_value(0.5),
                _ if n.is_multiple_of(2) => ATerm::from_value(4.0),
                _ => ATerm::from_value(0.25),
            },
            EnvSequence::SuperharmonicEx4 => ATerm {
                value: (nf + 1.0) / nf,
                complement: -1.0 / nf,
            },
            EnvSequence::DyadicEx5 => {
                if is_power_of_two(n + 1) {
                    ATerm::from_value(nf)
                } else if is_power_of_two(n) {
                    ATerm::from_value(1.0 / (nf - 1.0))
                } else {
                    ATerm::from_value(1.0)
                }
            }
            EnvSequence::Constant { value } => ATerm::from_value(*value),
            EnvSequence::Table { values, tail } => {
                ATerm::from_value(Self::table_value(values, *tail, n)?)
            }
            EnvSequence::ProportionalC { .. }
            | EnvSequence::NegativeProportionalC { .. }
            | EnvSequence::ExpTailEx6 { .. } => {
                return Err(Error::InvalidSequence(format!(
                    "family `{}` describes c_n and cannot fill the a slot",
                    self.family_name()
                )))
            }
        })
    }

    /// Value of the sequence in the `c` slot at index `n >= 1`, given the
    /// companion `a_n` and the model's `r`.
    pub fn c_term(&self, n: u64, a: ATerm, r: f64) -> Result<CTerm> {
        if n == 0 {
            return Err(Error::InvalidSequence(
                "sequences are indexed from 1".into(),
            ));
        }
        let nf = n as f64;
        let value = match self {
            EnvSequence::ProportionalC { sigma } => a.complement * sigma,
            EnvSequence::NegativeProportionalC { sigma } => -a.complement * sigma,
            EnvSequence::AlternatingEx3 => {
                if n % 2 == 1 {
                    1.0
                } else {
                    2.0
                }
            }
            EnvSequence::SuperharmonicEx4 => 1.0 / (nf * nf * (nf + 1.0)),
            EnvSequence::DyadicEx5 => {
                if is_power_of_two(n) && n >= 4 {
                    1.0
                } else {
                    1.0 / (nf * nf)
                }
            }
            EnvSequence::ExpTailEx6 { sigma } => {
                let exponent = nf.powf(*sigma);
                let value = -(-exponent).exp_m1();
                // 1 - c_n = exp(-n^sigma) exactly, even once c_n rounds to 1.
                let log_gap = if r == 1.0 {
                    -exponent
                } else {
                    (r - value).ln()
                };
                return Ok(CTerm { value, log_gap });
            }
            EnvSequence::Harmonic | EnvSequence::Convergent => self.a_term(n)?.value,
            EnvSequence::Constant { value } => *value,
            EnvSequence::Table { values, tail } => Self::table_value(values, *tail, n)?,
        };
        Ok(CTerm {
            value,
            log_gap: (r - value).ln(),
        })
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        match self {
            EnvSequence::ProportionalC { sigma }
            | EnvSequence::NegativeProportionalC { sigma }
            | EnvSequence::ExpTailEx6 { sigma } => {
                map.insert("sigma".to_string(), *sigma);
            }
            EnvSequence::Constant { value } => {
                map.insert("value".to_string(), *value);
            }
            _ => {}
        }
        map
    }
}

/// JSON shape of a sequence: `{"family": ..., "params": {...}}`, with
/// `values`/`tail` for tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSequence {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailRule>,
}

impl TryFrom<RawSequence> for EnvSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        let param = |name: &str| -> Result<f64> {
            raw.params.get(name).copied().ok_or_else(|| {
                Error::InvalidSequence(format!(
                    "family `{}` requires parameter `{name}`",
                    raw.family
                ))
            })
        };
        Ok(match raw.family.as_str() {
            "harmonic" => EnvSequence::Harmonic,
            "convergent" => EnvSequence::Convergent,
            "proportional_c" => EnvSequence::ProportionalC {
                sigma: param("sigma")?,
            },
            "negative_proportional_c" => EnvSequence::NegativeProportionalC {
                sigma: param("sigma")?,
            },
            "alternating_ex3" => EnvSequence::AlternatingEx3,
            "superharmonic_ex4" => EnvSequence::SuperharmonicEx4,
            "dyadic_ex5" => EnvSequence::DyadicEx5,
            "exp_tail_ex6" => EnvSequence::ExpTailEx6 {
                sigma: param("sigma")?,
            },
            "constant" => EnvSequence::Constant {
                value: param("value")?,
            },
            "table" => {
                let values = raw
                    .values
                    .ok_or_else(|| Error::InvalidSequence("table requires `values`".into()))?;
                if values.is_empty() {
                    return Err(Error::InvalidSequence("table must not be empty".into()));
                }
                EnvSequence::Table {
                    values,
                    tail: raw.tail.unwrap_or(TailRule::Error),
                }
            }
            other => return Err(Error::InvalidSequence(format!("unknown family `{other}`"))),
        })
    }
}

impl From<EnvSequence> for RawSequence {
    fn from(seq: EnvSequence) -> Self {
        let params = seq.params();
        let family = seq.family_name().to_string();
        let (values, tail) = match seq {
            EnvSequence::Table { values, tail } => (Some(values), Some(tail)),
            _ => (None, None),
        };
        RawSequence {
            family,
            params,
            values,
            tail,
        }
    }
}

/// Environment terms at one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub n: u64,
    pub a: f64,
    pub one_minus_a: f64,
    pub c: f64,
    /// `ln(r - c_n)`.
    pub log_gap: f64,
}

/// A validated parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct ThetaModel {
    theta: f64,
    r: f64,
    a_seq: EnvSequence,
    c_seq: EnvSequence,
    case: CaseLabel,
    checked_horizon: u64,
}

/// The on-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub theta: f64,
    pub r: f64,
    pub a: EnvSequence,
    pub c: EnvSequence,
}

impl TryFrom<ModelSpec> for ThetaModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        validate_model(spec.theta, spec.r, spec.a, spec.c, DEFAULT_CHECK_HORIZON)
    }
}

impl From<ThetaModel> for ModelSpec {
    fn from(model: ThetaModel) -> Self {
        ModelSpec {
            theta: model.theta,
            r: model.r,
            a: model.a_seq,
            c: model.c_seq,
        }
    }
}

/// Validates `(theta, r)` and the environment up to `check_horizon`.
///
/// Indices beyond the horizon are checked again whenever they are accessed
/// through [`ThetaModel::coefficients`].
pub fn validate_model(
    theta: f64,
    r: f64,
    a_seq: EnvSequence,
    c_seq: EnvSequence,
    check_horizon: u64,
) -> Result<ThetaModel> {
    if check_horizon < 1 {
        return Err(Error::rejected(None, "check horizon must be at least 1"));
    }
    let case = CaseLabel::classify(theta, r)?;
    let model = ThetaModel {
        theta,
        r,
        a_seq,
        c_seq,
        case,
        checked_horizon: check_horizon,
    };
    for n in 1..=check_horizon {
        model.coefficients(n)?;
    }
    Ok(model)
}

impl ThetaModel {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn case(&self) -> CaseLabel {
        self.case
    }

    pub fn a_seq(&self) -> &EnvSequence {
        &self.a_seq
    }

    pub fn c_seq(&self) -> &EnvSequence {
        &self.c_seq
    }

    pub fn checked_horizon(&self) -> u64 {
        self.checked_horizon
    }

    pub fn spec(&self) -> ModelSpec {
        self.clone().into()
    }

    /// `alpha = -1/theta` for negative theta.
    pub fn alpha(&self) -> Option<f64> {
        (self.theta < 0.0).then(|| -1.0 / self.theta)
    }

    /// Environment terms at index `n`, re-checked against the model's row.
    pub fn coefficients(&self, n: u64) -> Result<Coefficients> {
        let a = self.a_seq.a_term(n)?;
        let c = self.c_seq.c_term(n, a, self.r)?;
        let coeffs = Coefficients {
            n,
            a: a.value,
            one_minus_a: a.complement,
            c: c.value,
            log_gap: c.log_gap,
        };
        self.check_row(&coeffs)?;
        Ok(coeffs)
    }

    fn check_row(&self, k: &Coefficients) -> Result<()> {
        let n = Some(k.n);
        let (theta, r) = (self.theta, self.r);
        let row = self.case;
        if !(k.a.is_finite() && k.c.is_finite()) {
            return Err(Error::rejected(n, "a_n and c_n must be finite"));
        }
        if k.a <= 0.0 {
            return Err(Error::rejected(
                n,
                format!("{row}: a_n = {} must be > 0", k.a),
            ));
        }
        if row != CaseLabel::A && k.a >= 1.0 {
            return Err(Error::rejected(
                n,
                format!("{row}: a_n = {} must be < 1", k.a),
            ));
        }
        let s = CONSTRAINT_SLACK;
        let c = k.c;
        let between = |lo: f64, hi: f64, what: &str| -> Result<()> {
            if c < lo - s || c > hi + s {
                Err(Error::rejected(
                    n,
                    format!("{row}: c_n = {c} violates {what} = [{lo}, {hi}]"),
                ))
            } else {
                Ok(())
            }
        };
        match row {
            CaseLabel::A => {
                if c <= 0.0 {
                    return Err(Error::rejected(n, format!("(a): c_n = {c} must be > 0")));
                }
                if c < k.one_minus_a - s {
                    return Err(Error::rejected(
                        n,
                        format!("(a): c_n = {c} must be >= 1 - a_n = {}", k.one_minus_a),
                    ));
                }
                Ok(())
            }
            CaseLabel::B => between(
                k.one_minus_a * r.powf(-theta),
                k.one_minus_a * (r - 1.0).powf(-theta),
                "[(1-a_n) r^-theta, (1-a_n)(r-1)^-theta]",
            ),
            CaseLabel::C => {
                if c <= 0.0 {
                    return Err(Error::rejected(n, format!("(c): c_n = {c} must be > 0")));
                }
                between(0.0, k.one_minus_a, "(0, 1-a_n]")
            }
            CaseLabel::D => between(
                k.one_minus_a * (r - 1.0).powf(-theta),
                k.one_minus_a * r.powf(-theta),
                "[(1-a_n)(r-1)^-theta, (1-a_n) r^-theta]",
            ),
            CaseLabel::E => {
                if c < 0.0 || !k.log_gap.is_finite() {
                    Err(Error::rejected(
                        n,
                        format!("(e): c_n = {c} must lie in [0, 1)"),
                    ))
                } else {
                    Ok(())
                }
            }
            CaseLabel::F => between(0.0, 1.0, "[0, 1]"),
        }
    }

    /// True when every checked index sits on the boundary that keeps the law
    /// proper: `c_n = (1-a_n)(r-1)^-theta` in rows (b), (d) and `c_n = 1` in (f).
    pub fn proper_boundary_holds(&self, horizon: u64, tol: f64) -> bool {
        let target = |k: &Coefficients| -> Option<f64> {
            match self.case {
                CaseLabel::B | CaseLabel::D => {
                    Some(k.one_minus_a * (self.r - 1.0).powf(-self.theta))
                }
                CaseLabel::F => Some(1.0),
                _ => None,
            }
        };
        (1..=horizon).all(|n| match self.coefficients(n) {
            Ok(k) => target(&k).is_some_and(|t| (k.c - t).abs() <= tol),
            Err(_) => false,
        })
    }
}

/// `r - (scale (r-s)^-theta + shift)^(-1/theta)` for `theta != 0`.
///
/// At `s = r` the value is `r` when `r > 1` or `theta > 0`. For `theta < 0` and
/// `r = 1` the left limit is returned, which is the total proper mass.
pub(crate) fn power_form(theta: f64, r: f64, scale: f64, shift: f64, s: f64) -> f64 {
    if s >= r && (theta > 0.0 || r > 1.0) {
        return r;
    }
    r - inner_power(theta, r, scale, shift, s)
}

/// `(scale (r-s)^-theta + shift)^(-1/theta)`, i.e. `r - power_form(..)`.
pub(crate) fn inner_power(theta: f64, r: f64, scale: f64, shift: f64, s: f64) -> f64 {
    (scale * (r - s).powf(-theta) + shift).powf(-1.0 / theta)
}

/// `r - (r-s)^expo * exp(log_d)` for `theta = 0`.
pub(crate) fn log_form(r: f64, expo: f64, log_d: f64, s: f64) -> f64 {
    r - inner_log(r, expo, log_d, s)
}

pub(crate) fn inner_log(r: f64, expo: f64, log_d: f64, s: f64) -> f64 {
    if s >= r {
        return 0.0;
    }
    (expo * (r - s).ln() + log_d).exp()
}

pub(crate) fn check_domain(s: f64, lo: f64, hi: f64) -> Result<()> {
    if s.is_nan() || s < lo || s > hi {
        Err(Error::DomainError { value: s, lo, hi })
    } else {
        Ok(())
    }
}

/// One-step generating function `f_n(s)` on `[0, r]`.
pub fn step_pgf(model: &ThetaModel, n: u64, s: f64) -> Result<f64> {
    check_domain(s, 0.0, model.r)?;
    let k = model.coefficients(n)?;
    Ok(step_value(model.theta, model.r, &k, s))
}

pub(crate) fn step_value(theta: f64, r: f64, k: &Coefficients, s: f64) -> f64 {
    if theta == 0.0 {
        log_form(r, k.a, k.one_minus_a * k.log_gap, s)
    } else {
        power_form(theta, r, k.a, k.c, s)
    }
}
