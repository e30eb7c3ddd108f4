//! Generalized Laguerre polynomials and log-factorials.
//!
//! Laguerre values come from the upward three-term recurrence in the degree,
//!
//! ```text
//! (n+1) L_{n+1}^m(x) = (2n + 1 + m - x) L_n^m(x) - (n + m) L_{n-1}^m(x)
//! ```
//!
//! seeded with `L_0^m = 1` and `L_1^m = 1 + m - x`. One pass yields every
//! degree up to `n_max`, which is what the nonlinearity tables need.

use std::sync::OnceLock;

use crate::error::{Error, Result};

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Laguerre argument must be finite, got {x}")))
    }
}

/// `L_n^m(x)`.
pub fn laguerre(n: usize, m: u32, x: f64) -> Result<f64> {
    check_x(x)?;
    let m = f64::from(m);
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 + m - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + m - x) * cur - (kf + m) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `[L_0^m(x), L_1^m(x), ..., L_{n_max}^m(x)]` in a single recurrence pass.
///
/// Element `k` is bit-identical to `laguerre(k, m, x)`.
pub fn laguerre_sequence(n_max: usize, m: u32, x: f64) -> Result<Vec<f64>> {
    check_x(x)?;
    let mf = f64::from(m);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return Ok(out);
    }
    out.push(1.0 + mf - x);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + mf - x) * out[k] - (kf + mf) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    Ok(out)
}

const TABLE_LEN: usize = 64;

fn small_table() -> &'static [f64; TABLE_LEN] {
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        // Compensated summation keeps the table within an ulp or two.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (k, slot) in t.iter_mut().enumerate().skip(2) {
            let y = (k as f64).ln() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            *slot = sum;
        }
        t
    })
}

/// `ln(n!)`.
///
/// Tabulated below 64, Stirling series with five correction terms above;
/// the truncation error there is below 1e-19 absolute.
pub fn log_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return small_table()[n];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2_0(x: f64) -> f64 {
        1.0 - 2.0 * x + 0.5 * x * x
    }

    #[test]
    fn low_degree_values() {
        assert_eq!(laguerre(0, 5, 3.7).unwrap(), 1.0);
        assert!((laguerre(1, 1, 0.04).unwrap() - 1.96).abs() < 1e-15);
        assert!((laguerre(2, 0, 1.0).unwrap() - (-0.5)).abs() < 1e-15);
        for &x in &[0.0, 0.04, 0.3, 1.0, 2.5] {
            assert!((laguerre(2, 0, x).unwrap() - l2_0(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(laguerre(3, 0, f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(laguerre_sequence(3, 1, f64::INFINITY).is_err());
    }

    #[test]
    fn sequence_matches_pointwise() {
        let seq = laguerre_sequence(60, 1, 0.09).unwrap();
        for (k, v) in seq.iter().enumerate() {
            assert_eq!(v.to_bits(), laguerre(k, 1, 0.09).unwrap().to_bits());
        }
    }

    #[test]
    fn values_at_zero() {
        for n in 0..=50 {
            assert_eq!(laguerre(n, 1, 0.0).unwrap(), (n + 1) as f64);
            assert_eq!(laguerre(n, 0, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn value_at_zero_is_binomial() {
        for n in 0..30usize {
            for m in 0..6u32 {
                let log_binom = log_factorial(n + m as usize) - log_factorial(n) - log_factorial(m as usize);
                let v = laguerre(n, m, 0.0).unwrap();
                assert!((v.ln() - log_binom).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn recurrence_consistency() {
        for &x in &[0.0, 0.01, 0.04, 0.09, 0.25, 0.5, 1.0] {
            for m in 0..=1u32 {
                let seq = laguerre_sequence(201, m, x).unwrap();
                let mf = f64::from(m);
                for n in 2..=200usize {
                    let nf = n as f64;
                    let t1 = (nf + 1.0) * seq[n + 1];
                    let t2 = (2.0 * nf + 1.0 + mf - x) * seq[n];
                    let t3 = (nf + mf) * seq[n - 1];
                    let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(f64::MIN_POSITIVE);
                    assert!((t1 - t2 + t3).abs() / scale < 1e-9, "x={x} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn derivative_identity() {
        let h = 1e-6;
        for &x in &[0.04, 0.09, 0.3, 0.7, 1.0] {
            for n in 1..=40usize {
                let fd = (laguerre(n, 0, x + h).unwrap() - laguerre(n, 0, x - h).unwrap()) / (2.0 * h);
                let exact = -laguerre(n - 1, 1, x).unwrap();
                let scale = exact.abs().max(1.0);
                assert!((fd - exact).abs() / scale < 1e-5, "x={x} n={n}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn log_factorial_small() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert!((log_factorial(10) - 15.104412573075516).abs() < 1e-13);
    }

    #[test]
    fn log_factorial_accuracy_and_monotone() {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        let mut prev = 0.0;
        for n in 2..=10_000usize {
            let y = (n as f64).ln() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            let v = log_factorial(n);
            assert!((v - sum).abs() <= 1e-13 * sum, "n={n}: {v} vs {sum}");
            assert!(v >= prev);
            prev = v;
        }
    }
}
