//! Taylor coefficients of theta-family generating functions.
//!
//! Every pgf in the family is `g(s) = r - inner(s)` with either
//! `inner(s) = (a (r-s)^-theta + c)^(-1/theta)` or `inner(s) = D (r-s)^a`.
//! Writing `x = s/r`, the first is `u(x)^gamma` with `u = a r^-theta (1-x)^-theta + c`
//! and `gamma = -1/theta`; its coefficients follow from the binomial series of
//! `(1-x)^-theta` and the power recurrence
//!
//! ```text
//! k u_0 h_k = sum_{j=1..k} ((gamma + 1) j - k) u_j h_{k-j}
//! ```
//!
//! which costs O(J^2). The log form is a single binomial series, and
//! `theta = 1` reduces to a two-term linear recurrence.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytics::constants::{composite_constants, CompositeConstants};
use crate::environment::{inner_log, inner_power, ThetaModel};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_CUTOFF: usize = 1 << 20;

/// Negative coefficients down to this value are treated as round-off.
pub const CLIP_THRESHOLD: f64 = 1e-14;

const INITIAL_CUTOFF: usize = 64;

/// A truncated mass function on `{0, ..., J}` plus an unresolved tail and the
/// mass on Delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub weights: Vec<f64>,
    /// Proper mass above the cutoff.
    pub tail_mass: f64,
    /// Mass on Delta, `1 - g(1)`.
    pub defect_mass: f64,
    pub cutoff: usize,
    /// Largest magnitude of a negative coefficient clipped to zero.
    pub clipped: f64,
}

impl Pmf {
    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(j).copied().unwrap_or(0.0)
    }

    /// `sum(weights) + tail_mass`, the proper mass.
    pub fn proper_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.tail_mass
    }

    pub fn mean_lower_bound(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| j as f64 * w)
            .sum()
    }

    /// Rows `(j, weight)` followed by the tail, defect and cutoff.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,weight\n");
        for (j, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "{j},{}", fmt_f64(*w));
        }
        let _ = writeln!(out, "tail_mass,{}", fmt_f64(self.tail_mass));
        let _ = writeln!(out, "defect_mass,{}", fmt_f64(self.defect_mass));
        let _ = writeln!(out, "cutoff,{}", self.cutoff);
        out
    }
}

/// A member of the theta family, in one of its two closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ThetaPgf {
    /// `r - (a (r-s)^-theta + c)^(-1/theta)`.
    Power { theta: f64, r: f64, a: f64, c: f64 },
    /// `r - exp(log_d) (r-s)^a`.
    Log { r: f64, a: f64, log_d: f64 },
}

impl ThetaPgf {
    /// Builds the pgf from the one-step parameters; for `theta = 0`, `c` enters
    /// through `d = (r - c)^(1-a)`.
    pub fn from_parameters(theta: f64, r: f64, a: f64, c: f64) -> Self {
        if theta == 0.0 {
            ThetaPgf::Log {
                r,
                a,
                log_d: (1.0 - a) * (r - c).ln(),
            }
        } else {
            ThetaPgf::Power { theta, r, a, c }
        }
    }

    /// Offspring pgf `f_n`.
    pub fn step(model: &ThetaModel, n: u64) -> Result<Self> {
        let k = model.coefficients(n)?;
        Ok(if model.theta() == 0.0 {
            ThetaPgf::Log {
                r: model.r(),
                a: k.a,
                log_d: k.one_minus_a * k.log_gap,
            }
        } else {
            ThetaPgf::Power {
                theta: model.theta(),
                r: model.r(),
                a: k.a,
                c: k.c,
            }
        })
    }

    /// Composed pgf `F_n` from its constants.
    pub fn composed(model: &ThetaModel, k: &CompositeConstants) -> Self {
        if model.theta() == 0.0 {
            ThetaPgf::Log {
                r: model.r(),
                a: k.a_n,
                log_d: k.log_d_n,
            }
        } else {
            ThetaPgf::Power {
                theta: model.theta(),
                r: model.r(),
                a: k.a_n,
                c: k.c_n,
            }
        }
    }

    pub fn r(&self) -> f64 {
        match *self {
            ThetaPgf::Power { r, .. } | ThetaPgf::Log { r, .. } => r,
        }
    }

    /// `r - g(s)`.
    pub fn gap(&self, s: f64) -> f64 {
        match *self {
            ThetaPgf::Power { theta, r, a, c } => {
                if s >= r && (theta > 0.0 || r > 1.0) {
                    0.0
                } else {
                    inner_power(theta, r, a, c, s)
                }
            }
            ThetaPgf::Log { r, a, log_d } => inner_log(r, a, log_d, s),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.r() - self.gap(s)
    }

    /// `1 - g(1)`.
    pub fn defect(&self) -> f64 {
        (self.gap(1.0) - (self.r() - 1.0)).max(0.0)
    }

    pub fn expand(&self, tail_tol: f64, max_cutoff: usize) -> Result<Pmf> {
        let mut series = PgfSeries::new(*self);
        series.expand_until(tail_tol, max_cutoff)?;
        Ok(series.to_pmf())
    }
}

fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let y = t - comp;
        let next = sum + y;
        comp = (next - sum) - y;
        sum = next;
    }
    sum
}

/// Incrementally extended coefficient table of one pgf.
#[derive(Debug, Clone)]
pub struct PgfSeries {
    pgf: ThetaPgf,
    /// Coefficients of `u` (power form only).
    u: Vec<f64>,
    /// Coefficients of `inner`.
    h: Vec<f64>,
    weights: Vec<f64>,
    partial: f64,
    partial_comp: f64,
    clipped: f64,
    total: f64,
}

impl PgfSeries {
    pub fn new(pgf: ThetaPgf) -> Self {
        PgfSeries {
            pgf,
            u: Vec::new(),
            h: Vec::new(),
            weights: Vec::new(),
            partial: 0.0,
            partial_comp: 0.0,
            clipped: 0.0,
            total: 1.0 - pgf.defect(),
        }
    }

    pub fn pgf(&self) -> &ThetaPgf {
        &self.pgf
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Proper mass not yet assigned to a coefficient.
    pub fn tail(&self) -> f64 {
        (self.total - self.partial).max(0.0)
    }

    fn next_inner(&mut self, k: usize) -> f64 {
        match self.pgf {
            ThetaPgf::Log { r, a, log_d } => {
                // D r^a (1 - x)^a with x = s/r
                let prev = if k == 0 {
                    (log_d + a * r.ln()).exp()
                } else {
                    self.h[k - 1] * ((k as f64 - 1.0 - a) / (k as f64 * r))
                };
                self.h.push(prev);
                prev
            }
            ThetaPgf::Power { theta, r, a, c } if theta == 1.0 => {
                // (K - c s) h = r - s with K = a + c r
                let big_k = a + c * r;
                let v = match k {
                    0 => r / big_k,
                    1 => (c * self.h[0] - 1.0) / big_k,
                    _ => c * self.h[k - 1] / big_k,
                };
                self.h.push(v);
                v
            }
            ThetaPgf::Power { theta, r, a, c } => {
                let uk = if k == 0 {
                    a * r.powf(-theta)
                } else {
                    // binomial series of (1 - x)^-theta, scaled by r^-k
                    self.u[k - 1] * ((k as f64 - 1.0 + theta) / (k as f64 * r))
                };
                self.u.push(uk);
                let gamma = -1.0 / theta;
                let u0 = self.u[0] + c;
                let v = if k == 0 {
                    u0.powf(gamma)
                } else {
                    let kf = k as f64;
                    let s = kahan_sum(
                        (1..=k)
                            .map(|j| ((gamma + 1.0) * j as f64 - kf) * self.u[j] * self.h[k - j]),
                    );
                    s / (kf * u0)
                };
                self.h.push(v);
                v
            }
        }
    }

    /// Extends the table to indices `0..cutoff`.
    pub fn extend_to(&mut self, cutoff: usize) -> Result<()> {
        while self.weights.len() < cutoff {
            let k = self.weights.len();
            let inner = self.next_inner(k);
            let mut w = if k == 0 { self.pgf.r() - inner } else { -inner };
            if w < 0.0 {
                if w < -CLIP_THRESHOLD {
                    return Err(Error::NegativeCoefficient { index: k, value: w });
                }
                self.clipped = self.clipped.max(-w);
                w = 0.0;
            }
            let y = w - self.partial_comp;
            let next = self.partial + y;
            self.partial_comp = (next - self.partial) - y;
            self.partial = next;
            self.weights.push(w);
        }
        Ok(())
    }

    /// Doubles the cutoff until the tail is below `tail_tol`.
    ///
    /// Gives up early once the observed tail decay, extrapolated as a power
    /// law, cannot reach `tail_tol` within `max_cutoff`.
    pub fn expand_until(&mut self, tail_tol: f64, max_cutoff: usize) -> Result<()> {
        let mut cutoff = self
            .weights
            .len()
            .max(INITIAL_CUTOFF.min(max_cutoff))
            .max(1);
        let mut previous_tail = f64::NAN;
        loop {
            self.extend_to(cutoff)?;
            let tail = self.tail();
            if tail <= tail_tol {
                return Ok(());
            }
            let exceeded = || Error::CutoffExceeded {
                cutoff,
                tail_mass: tail,
                partial: Box::new(self.to_pmf()),
            };
            if cutoff >= max_cutoff {
                return Err(exceeded());
            }
            if cutoff >= 1024 && previous_tail > tail {
                let decay = (previous_tail / tail).log2();
                let projected = cutoff as f64 * (tail / tail_tol).powf(1.0 / decay);
                if projected > 2.0 * max_cutoff as f64 {
                    return Err(exceeded());
                }
            }
            previous_tail = tail;
            cutoff = (cutoff * 2).min(max_cutoff);
        }
    }

    pub fn to_pmf(&self) -> Pmf {
        Pmf {
            weights: self.weights.clone(),
            tail_mass: self.tail(),
            defect_mass: 1.0 - self.total,
            cutoff: self.weights.len().saturating_sub(1),
            clipped: self.clipped,
        }
    }
}

/// Mass function of a theta-family pgf with the given parameters.
pub fn pmf_from_theta_pgf(
    theta: f64,
    r: f64,
    a_coef: f64,
    c_coef: f64,
    tail_tol: f64,
    max_cutoff: usize,
) -> Result<Pmf> {
    ThetaPgf::from_parameters(theta, r, a_coef, c_coef).expand(tail_tol, max_cutoff)
}

/// Mass function of the offspring law of generation `n`.
pub fn offspring_pmf(model: &ThetaModel, n: u64, tail_tol: f64, max_cutoff: usize) -> Result<Pmf> {
    ThetaPgf::step(model, n)?.expand(tail_tol, max_cutoff)
}

/// Mass function of `Z_n`, from the composite constants.
pub fn population_pmf(model: &ThetaModel, n: u64, tail_tol: f64, max_cutoff: usize) -> Result<Pmf> {
    let k = composite_constants(model, n)?;
    ThetaPgf::composed(model, &k).expand(tail_tol, max_cutoff)
}
