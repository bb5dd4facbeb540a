use serde::{Deserialize, Serialize};

use crate::environment::{Coefficients, ThetaModel};
use crate::error::Result;
use crate::io::{csv_line, extended_float, fmt_f64};

/// `(A_n, C_n, ln D_n, B_n)` at generation `n`.
///
/// `A_n = prod a_i`, `C_n = sum A_{i-1} c_i`, `D_n = prod (r - c_i)^(A_{i-1} - A_i)`
/// and `B_n = C_n / A_n`. `D_n` is kept as a logarithm; `B_n` is `+inf` only
/// when `A_n` underflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeConstants {
    pub n: u64,
    pub a_n: f64,
    pub c_n: f64,
    #[serde(with = "extended_float")]
    pub log_d_n: f64,
    #[serde(with = "extended_float")]
    pub b_n: f64,
}

impl CompositeConstants {
    pub const INITIAL: CompositeConstants = CompositeConstants {
        n: 0,
        a_n: 1.0,
        c_n: 0.0,
        log_d_n: 0.0,
        b_n: 0.0,
    };

    pub fn d_n(&self) -> f64 {
        self.log_d_n.exp()
    }

    /// Constants at `n + 1` from those at `n` and the environment at `n + 1`.
    pub fn advance(&self, k: &Coefficients) -> CompositeConstants {
        let a_n = self.a_n * k.a;
        let c_n = self.c_n + self.a_n * k.c;
        // A_{n-1} - A_n = A_{n-1} (1 - a_n); a zero exponent leaves D_n alone
        let exponent = self.a_n * k.one_minus_a;
        let log_d_n = if exponent == 0.0 {
            self.log_d_n
        } else {
            self.log_d_n + exponent * k.log_gap
        };
        let b_n = if a_n > 0.0 { c_n / a_n } else { f64::INFINITY };
        CompositeConstants {
            n: self.n + 1,
            a_n,
            c_n,
            log_d_n,
            b_n,
        }
    }
}

/// Iterator over `CompositeConstants` for `n = 1, 2, ...`.
pub struct ConstantsIter<'a> {
    model: &'a ThetaModel,
    current: CompositeConstants,
}

impl<'a> ConstantsIter<'a> {
    pub fn new(model: &'a ThetaModel) -> Self {
        ConstantsIter {
            model,
            current: CompositeConstants::INITIAL,
        }
    }
}

impl Iterator for ConstantsIter<'_> {
    type Item = Result<CompositeConstants>;

    fn next(&mut self) -> Option<Self::Item> {
        let k = match self.model.coefficients(self.current.n + 1) {
            Ok(k) => k,
            Err(e) => return Some(Err(e)),
        };
        self.current = self.current.advance(&k);
        Some(Ok(self.current))
    }
}

pub fn composite_constants(model: &ThetaModel, n: u64) -> Result<CompositeConstants> {
    let mut current = CompositeConstants::INITIAL;
    for i in 1..=n {
        current = current.advance(&model.coefficients(i)?);
    }
    Ok(current)
}

/// Constants for `n = 0..=horizon`, indexed by `n`.
pub fn constants_table(model: &ThetaModel, horizon: u64) -> Result<Vec<CompositeConstants>> {
    let mut table = Vec::with_capacity(horizon as usize + 1);
    table.push(CompositeConstants::INITIAL);
    for item in ConstantsIter::new(model).take(horizon as usize) {
        table.push(item?);
    }
    Ok(table)
}

/// CSV of `(n, A_n, C_n, D_n, B_n, F_n(0), F_n(1))` for the requested indices.
pub fn constants_csv(model: &ThetaModel, indices: &[u64]) -> Result<String> {
    let mut out = String::from("n,A_n,C_n,D_n,B_n,F_n(0),F_n(1)\n");
    let horizon = indices.iter().copied().max().unwrap_or(0);
    let table = constants_table(model, horizon)?;
    for &n in indices {
        let k = &table[n as usize];
        let (f0, f1) = if n == 0 {
            (0.0, 1.0)
        } else {
            (
                super::pgf::composed_from_constants(model, k, 0.0),
                super::pgf::composed_from_constants(model, k, 1.0),
            )
        };
        out.push_str(&csv_line(&[
            n.to_string(),
            fmt_f64(k.a_n),
            fmt_f64(k.c_n),
            fmt_f64(k.d_n()),
            fmt_f64(k.b_n),
            fmt_f64(f0),
            fmt_f64(f1),
        ]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{validate_model, EnvSequence};

    #[test]
    fn example_one_at_three() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 2.0 },
            10,
        )
        .unwrap();
        let k = composite_constants(&m, 3).unwrap();
        assert!((k.a_n - 0.25).abs() < 1e-15);
        assert!((k.c_n - 1.5).abs() < 1e-15);
        assert!((k.b_n - 6.0).abs() < 1e-14);
    }

    #[test]
    fn empty_products_at_zero() {
        let m = validate_model(
            0.5,
            1.0,
            EnvSequence::Harmonic,
            EnvSequence::ProportionalC { sigma: 1.0 },
            1,
        )
        .unwrap();
        let k = composite_constants(&m, 0).unwrap();
        assert_eq!((k.a_n, k.c_n, k.d_n()), (1.0, 0.0, 1.0));
    }

    #[test]
    fn unit_gap_gives_unit_d() {
        let m = validate_model(
            0.0,
            2.0,
            EnvSequence::Harmonic,
            EnvSequence::Constant { value: 1.0 },
            4,
        )
        .unwrap();
        let k = composite_constants(&m, 4).unwrap();
        assert_eq!(k.log_d_n, 0.0);
        assert_eq!(k.d_n(), 1.0);
    }

    #[test]
    fn table_matches_direct() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Convergent,
            EnvSequence::ProportionalC { sigma: 1.5 },
            50,
        )
        .unwrap();
        let table = constants_table(&m, 50).unwrap();
        assert_eq!(table.len(), 51);
        assert_eq!(table[37], composite_constants(&m, 37).unwrap());
        // A_n = (n+3)/(3(n+1)) and C_n = (1 - A_n) sigma
        for k in &table[1..] {
            let n = k.n as f64;
            assert!((k.a_n - (n + 3.0) / (3.0 * (n + 1.0))).abs() < 1e-14);
            assert!((k.c_n - (1.0 - k.a_n) * 1.5).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let m = validate_model(
            1.0,
            1.0,
            EnvSequence::Constant { value: 1.0 },
            EnvSequence::Constant { value: 1.0 },
            4,
        )
        .unwrap();
        let csv = constants_csv(&m, &[1, 4]).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("4,"));
        let f0: f64 = lines[2].split(',').nth(5).unwrap().parse().unwrap();
        assert!((f0 - 0.8).abs() < 1e-15);
    }
}
