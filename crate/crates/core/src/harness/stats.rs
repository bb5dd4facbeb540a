//! Sample summaries and goodness-of-fit distances.

/// Nominal false-failure probability of one distributional check.
pub const FALSE_FAILURE: f64 = 1e-3;

/// Multiple of the standard error allowed by CLT-based checks; two-sided
/// normal tail at 4 SE is about 6e-5.
pub const SE_MULTIPLIER: f64 = 4.0;

/// Below this many replicates tolerances widen and reports flag low power.
pub const WIDE_MODE_BELOW: u64 = 1000;
pub const WIDE_SE_MULTIPLIER: f64 = 6.0;

/// Sample mean and its standard error.
pub fn mean_se(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return (if n == 1 { mean } else { f64::NAN }, f64::NAN);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Kolmogorov-Smirnov distance between the sample and `cdf`.
///
/// `cdf` is right-continuous; an atom at `-inf` is allowed, every other point
/// is treated as a continuity point of the limit.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = samples.iter().copied().filter(|x| !x.is_nan()).collect();
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        let f = cdf(v);
        let left = if v == f64::NEG_INFINITY { 0.0 } else { f };
        d = d
            .max((j as f64 / n - f).abs())
            .max((i as f64 / n - left).abs());
        i = j;
    }
    d
}

/// DKW bound: `P(D_n > t) <= alpha` for `t = sqrt(ln(2/alpha) / (2n))`.
pub fn ks_threshold(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
