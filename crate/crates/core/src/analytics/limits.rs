//! Numeric limit detection for the composite constants.
//!
//! A sequence is inspected on its final window `[N/2, N]` and at the
//! checkpoints `N/16, N/8, N/4, N/2, 3N/4, N`:
//!
//! * monotone on the window: determined when the raw checkpoints agree within
//!   `tol`, or when Aitken extrapolation over doublings (applied once, then to
//!   its own output) is stable within `tol`;
//!   divergent when it exceeds `1/tol` while still growing, or when its doubling
//!   increments stop shrinking;
//! * not monotone: the window minimum and maximum act as liminf/limsup proxies.
//!   A diverging minimum means `+inf`; a gap above `10 tol` means oscillation.
//!
//! Anything else is reported as undetermined together with the evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::constants::ConstantsIter;
use crate::environment::ThetaModel;
use crate::error::Result;

pub const DEFAULT_LIMIT_TOL: f64 = 1e-6;

/// Doubling increments shrinking slower than this are treated as divergence.
const GROWTH_RATIO: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LimitValue {
    Finite(f64),
    PosInfinity,
    NegInfinity,
    Oscillating,
    Undetermined,
}

impl LimitValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LimitValue::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_determined(self) -> bool {
        matches!(
            self,
            LimitValue::Finite(_) | LimitValue::PosInfinity | LimitValue::NegInfinity
        )
    }

    pub fn is_pos_infinite(self) -> bool {
        matches!(self, LimitValue::PosInfinity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEvidence {
    pub rule: String,
    pub checkpoints: Vec<(u64, f64)>,
    pub window_low: f64,
    pub window_high: f64,
    /// Increments between consecutive doubling checkpoints.
    pub increments: Vec<f64>,
    pub extrapolated: Vec<f64>,
}

fn window_extent(xs: &[f64], k: usize) -> (f64, f64) {
    xs[(k / 2).max(1) - 1..k]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Direction of divergence given three checkpoints and their increments.
fn diverges(early: f64, mid: f64, late: f64, tol: f64) -> Option<LimitValue> {
    let (d1, d2) = (mid - early, late - mid);
    if late > 1.0 / tol && early < mid && mid < late {
        return Some(LimitValue::PosInfinity);
    }
    if late < -1.0 / tol && early > mid && mid > late {
        return Some(LimitValue::NegInfinity);
    }
    if d1 != 0.0 && d1 * d2 > 0.0 && d2.abs() >= GROWTH_RATIO * d1.abs() && d2.abs() > tol {
        return Some(if d2 > 0.0 {
            LimitValue::PosInfinity
        } else {
            LimitValue::NegInfinity
        });
    }
    None
}

/// Aitken extrapolation `x + d rho / (1 - rho)` with `rho = d / d_prev`.
fn aitken(x: f64, d_prev: f64, d: f64) -> Option<f64> {
    if d == 0.0 {
        return Some(x);
    }
    if d_prev == 0.0 || d * d_prev < 0.0 {
        return None;
    }
    let rho = d / d_prev;
    (rho < GROWTH_RATIO).then(|| x + d * rho / (1.0 - rho))
}

/// Classifies the limit of `xs[i] = x_{i+1}`.
pub fn detect_limit(xs: &[f64], tol: f64) -> (LimitValue, SequenceEvidence) {
    let n = xs.len();
    let mut ev = SequenceEvidence {
        rule: String::new(),
        checkpoints: Vec::new(),
        window_low: f64::NAN,
        window_high: f64::NAN,
        increments: Vec::new(),
        extrapolated: Vec::new(),
    };
    if n < 16 {
        ev.rule = "sequence too short".into();
        return (LimitValue::Undetermined, ev);
    }
    let x = |k: usize| xs[k - 1];
    let ks = [n / 16, n / 8, n / 4, n / 2, 3 * n / 4, n];
    ev.checkpoints = ks.iter().map(|&k| (k as u64, x(k))).collect();
    let last = x(n);
    if last == f64::INFINITY {
        ev.rule = "overflowed to +inf".into();
        return (LimitValue::PosInfinity, ev);
    }
    let window = &xs[n / 2 - 1..];
    if window.iter().any(|v| !v.is_finite()) {
        ev.rule = "non-finite values in final window".into();
        return (LimitValue::Undetermined, ev);
    }
    let (lo, hi) = window_extent(xs, n);
    ev.window_low = lo;
    ev.window_high = hi;
    let variation: f64 = window.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let net = (last - x(n / 2)).abs();
    let doubling = [x(n / 16), x(n / 8), x(n / 4), x(n / 2), last];
    let d: Vec<f64> = doubling.windows(2).map(|w| w[1] - w[0]).collect();
    ev.increments = d.clone();

    if variation <= net + tol {
        if net <= tol && (last - x(3 * n / 4)).abs() <= tol {
            ev.rule = "checkpoints agree within tol".into();
            return (LimitValue::Finite(last), ev);
        }
        if let Some(inf) = diverges(x(n / 4), x(n / 2), last, tol) {
            ev.rule = "monotone with non-decaying doubling increments".into();
            return (inf, ev);
        }
        let level1: Vec<Option<f64>> = (0..3)
            .map(|i| aitken(doubling[i + 2], d[i], d[i + 1]))
            .collect();
        ev.extrapolated = level1.iter().flatten().copied().collect();
        if let (Some(l_half), Some(l_full)) = (level1[1], level1[2]) {
            if (l_full - l_half).abs() <= tol {
                ev.rule = "extrapolated limit stable within tol".into();
                return (LimitValue::Finite(l_full), ev);
            }
            if let Some(l_quarter) = level1[0] {
                if let Some(l2) = aitken(l_full, l_half - l_quarter, l_full - l_half) {
                    ev.extrapolated.push(l2);
                    if (l2 - l_full).abs() <= tol {
                        ev.rule = "second-level extrapolation within tol".into();
                        return (LimitValue::Finite(l2), ev);
                    }
                }
            }
        }
        ev.rule = "monotone but not settled".into();
        return (LimitValue::Undetermined, ev);
    }

    let lows: Vec<f64> = [n / 4, n / 2, n]
        .iter()
        .map(|&k| window_extent(xs, k).0)
        .collect();
    let highs: Vec<f64> = [n / 4, n / 2, n]
        .iter()
        .map(|&k| window_extent(xs, k).1)
        .collect();
    if let Some(LimitValue::PosInfinity) = diverges(lows[0], lows[1], lows[2], tol) {
        ev.rule = "window minimum diverges".into();
        return (LimitValue::PosInfinity, ev);
    }
    if let Some(LimitValue::NegInfinity) = diverges(highs[0], highs[1], highs[2], tol) {
        ev.rule = "window maximum diverges to -inf".into();
        return (LimitValue::NegInfinity, ev);
    }
    let gap = hi - lo;
    if gap <= tol {
        ev.rule = "window envelope within tol".into();
        (LimitValue::Finite(0.5 * (hi + lo)), ev)
    } else if gap > 10.0 * tol {
        ev.rule = "window liminf/limsup gap exceeds 10 tol".into();
        (LimitValue::Oscillating, ev)
    } else {
        ev.rule = "non-monotone window, small gap".into();
        (LimitValue::Undetermined, ev)
    }
}

/// Limits `A`, `C`, `D` (row e/f only) and `B` with the evidence behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub a: LimitValue,
    pub c: LimitValue,
    pub d: Option<LimitValue>,
    pub b: LimitValue,
    pub horizon_used: u64,
    pub tol: f64,
    pub evidence: BTreeMap<String, SequenceEvidence>,
}

/// A quantity below this multiple of the tolerance is read as zero.
const ZERO_FACTOR: f64 = 10.0;

impl LimitConstants {
    /// Limits supplied by the caller rather than detected.
    pub fn supplied(a: f64, c: f64, d: Option<f64>) -> Self {
        let as_limit = |v: f64| {
            if v == f64::INFINITY {
                LimitValue::PosInfinity
            } else {
                LimitValue::Finite(v)
            }
        };
        let b = if a > 0.0 && a.is_finite() {
            as_limit(c / a)
        } else if a == 0.0 && c > 0.0 {
            LimitValue::PosInfinity
        } else {
            LimitValue::Undetermined
        };
        LimitConstants {
            a: as_limit(a),
            c: as_limit(c),
            d: d.map(as_limit),
            b,
            horizon_used: 0,
            tol: DEFAULT_LIMIT_TOL,
            evidence: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self, v: LimitValue) -> bool {
        matches!(v, LimitValue::Finite(x) if x.abs() <= ZERO_FACTOR * self.tol)
    }

    /// Finite and clearly away from zero.
    pub fn is_positive(&self, v: LimitValue) -> bool {
        matches!(v, LimitValue::Finite(x) if x > ZERO_FACTOR * self.tol)
    }
}

pub fn limit_constants(model: &ThetaModel, horizon: u64, tol: f64) -> Result<LimitConstants> {
    let horizon = horizon.max(16);
    let mut a = Vec::with_capacity(horizon as usize);
    let mut c = Vec::with_capacity(horizon as usize);
    let mut log_d = Vec::with_capacity(horizon as usize);
    let mut b = Vec::with_capacity(horizon as usize);
    for item in ConstantsIter::new(model).take(horizon as usize) {
        let k = item?;
        a.push(k.a_n);
        c.push(k.c_n);
        log_d.push(k.log_d_n);
        b.push(k.b_n);
    }
    let mut evidence = BTreeMap::new();
    let mut run = |name: &str, xs: &[f64]| {
        let (value, ev) = detect_limit(xs, tol);
        evidence.insert(name.to_string(), ev);
        value
    };
    let a_lim = run("A", &a);
    let c_lim = run("C", &c);
    let b_lim = run("B", &b);
    let d_lim = (model.theta() == 0.0).then(|| match run("log D", &log_d) {
        LimitValue::Finite(l) => LimitValue::Finite(l.exp()),
        LimitValue::NegInfinity => LimitValue::Finite(0.0),
        LimitValue::PosInfinity => LimitValue::PosInfinity,
        _ => LimitValue::Undetermined,
    });
    // only B carries the oscillation marker
    let demote = |v: LimitValue| match v {
        LimitValue::Oscillating => LimitValue::Undetermined,
        other => other,
    };
    // A_n > 0: extrapolation can only undershoot zero by round-off
    let a_lim = match a_lim {
        LimitValue::Finite(x) => LimitValue::Finite(x.max(0.0)),
        other => other,
    };
    Ok(LimitConstants {
        a: demote(a_lim),
        c: demote(c_lim),
        d: d_lim,
        b: b_lim,
        horizon_used: horizon,
        tol,
        evidence,
    })
}
