//! The deformation function `f(n)` and its running products `f(n)! = f(1)...f(n)`.

use std::fmt;
use std::ops::Mul;
use std::path::Path;

use crate::error::{Error, Result};
use crate::specfun;

pub const DEFAULT_DENOM_EPSILON: f64 = 1e-12;

/// A real number stored as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    pub sign: i8,
    /// Ignored when `sign == 0`.
    pub log_magnitude: f64,
}

impl SignedLogValue {
    pub const ONE: Self = SignedLogValue { sign: 1, log_magnitude: 0.0 };
    pub const ZERO: Self = SignedLogValue { sign: 0, log_magnitude: f64::NEG_INFINITY };

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLogValue { sign: if x > 0.0 { 1 } else { -1 }, log_magnitude: x.abs().ln() }
        }
    }

    pub fn to_real(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn recip(self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(SignedLogValue { sign: self.sign, log_magnitude: -self.log_magnitude })
        }
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return Self::ZERO;
        }
        let sign = if k % 2 == 0 { 1 } else { self.sign };
        SignedLogValue { sign, log_magnitude: self.log_magnitude * f64::from(k) }
    }
}

impl Mul for SignedLogValue {
    type Output = SignedLogValue;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            Self::ZERO
        } else {
            SignedLogValue {
                sign: self.sign * rhs.sign,
                log_magnitude: self.log_magnitude + rhs.log_magnitude,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    Identity,
    /// Trapped-ion motional nonlinearity `L_n^1(eta^2) / ((n+1) L_n^0(eta^2))`.
    TrappedIon { eta: f64 },
    /// `values[k-1]` holds `f(k)`.
    Table { values: Vec<f64> },
}

/// Which `f(n)` defines the deformed algebra. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    kind: NonlinearityKind,
    denom_epsilon: f64,
}

impl NonlinearitySpec {
    pub fn identity() -> Self {
        NonlinearitySpec { kind: NonlinearityKind::Identity, denom_epsilon: DEFAULT_DENOM_EPSILON }
    }

    pub fn trapped_ion(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidArgument(format!("Lamb-Dicke parameter must be finite and >= 0, got {eta}")));
        }
        Ok(NonlinearitySpec { kind: NonlinearityKind::TrappedIon { eta }, denom_epsilon: DEFAULT_DENOM_EPSILON })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("table value f({}) is not finite", k + 1)));
        }
        Ok(NonlinearitySpec { kind: NonlinearityKind::Table { values }, denom_epsilon: DEFAULT_DENOM_EPSILON })
    }

    /// Reads a table file: one real per line, line k holding `f(k)`;
    /// blank lines and `#` comments are skipped.
    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Table { path: path.to_path_buf(), message: e.to_string() })?;
        let values = parse_table(&text).map_err(|message| Error::Table { path: path.to_path_buf(), message })?;
        Self::table(values)
    }

    pub fn with_denom_epsilon(mut self, eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidArgument(format!("denom_epsilon must be positive, got {eps}")));
        }
        self.denom_epsilon = eps;
        Ok(self)
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn denom_epsilon(&self) -> f64 {
        self.denom_epsilon
    }

    /// Lamb-Dicke parameter, 0 for the other kinds.
    pub fn eta(&self) -> f64 {
        match self.kind {
            NonlinearityKind::TrappedIon { eta } => eta,
            _ => 0.0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NonlinearityKind::Identity => "identity",
            NonlinearityKind::TrappedIon { .. } => "trapped_ion",
            NonlinearityKind::Table { .. } => "table",
        }
    }

    fn trapped_ion_ratio(&self, n: usize, l1: f64, l0: f64) -> Result<f64> {
        let denominator = (n as f64 + 1.0) * l0;
        if denominator.abs() < self.denom_epsilon || !denominator.is_finite() {
            return Err(Error::SingularDenominator { n, denominator });
        }
        Ok(l1 / denominator)
    }

    /// `f(n)`. For table specs `f(0)` is taken as 1; it never enters a
    /// ladder matrix element.
    pub fn f_value(&self, n: usize) -> Result<f64> {
        match &self.kind {
            NonlinearityKind::Identity => Ok(1.0),
            NonlinearityKind::TrappedIon { eta } => {
                let x = eta * eta;
                let l1 = specfun::laguerre(n, 1, x)?;
                let l0 = specfun::laguerre(n, 0, x)?;
                self.trapped_ion_ratio(n, l1, l0)
            }
            NonlinearityKind::Table { values } => match n {
                0 => Ok(1.0),
                _ => values.get(n - 1).copied().ok_or(Error::TableExhausted { n, len: values.len() }),
            },
        }
    }

    /// `[f(0), f(1), ..., f(n_max)]`, evaluating each value once.
    pub fn f_values(&self, n_max: usize) -> Result<Vec<f64>> {
        match &self.kind {
            NonlinearityKind::Identity => Ok(vec![1.0; n_max + 1]),
            NonlinearityKind::TrappedIon { eta } => {
                let x = eta * eta;
                let l1 = specfun::laguerre_sequence(n_max, 1, x)?;
                let l0 = specfun::laguerre_sequence(n_max, 0, x)?;
                (0..=n_max).map(|n| self.trapped_ion_ratio(n, l1[n], l0[n])).collect()
            }
            NonlinearityKind::Table { .. } => (0..=n_max).map(|n| self.f_value(n)).collect(),
        }
    }

    /// `f(n)! = f(1)...f(n)`, with `f(0)! = 1`.
    pub fn f_factorial(&self, n: usize) -> Result<SignedLogValue> {
        Ok(*self.f_factorial_prefix(n)?.last().expect("prefix is never empty"))
    }

    /// `[f(0)!, f(1)!, ..., f(n_max)!]`.
    pub fn f_factorial_prefix(&self, n_max: usize) -> Result<Vec<SignedLogValue>> {
        let values = self.f_values(n_max)?;
        Ok(prefix_products(&values))
    }
}

pub(crate) fn prefix_products(f: &[f64]) -> Vec<SignedLogValue> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = SignedLogValue::ONE;
    out.push(acc);
    for &v in f.iter().skip(1) {
        acc = acc * SignedLogValue::from_real(v);
        out.push(acc);
    }
    out
}

fn parse_table(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let v: f64 = content
            .parse()
            .map_err(|_| format!("line {}: cannot parse {:?} as a real", lineno + 1, content))?;
        values.push(v);
    }
    Ok(values)
}

impl fmt::Display for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NonlinearityKind::Identity => write!(f, "identity"),
            NonlinearityKind::TrappedIon { eta } => write!(f, "trapped-ion(eta={eta})"),
            NonlinearityKind::Table { values } => write!(f, "table({} values)", values.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    // Explicit low-order Laguerre polynomials at x.
    fn l1_1(x: f64) -> f64 {
        2.0 - x
    }
    fn l1_0(x: f64) -> f64 {
        1.0 - x
    }
    fn l2_1(x: f64) -> f64 {
        (x * x - 6.0 * x + 6.0) / 2.0
    }
    fn l2_0(x: f64) -> f64 {
        (x * x - 4.0 * x + 2.0) / 2.0
    }

    #[test]
    fn identity_is_one() {
        let s = NonlinearitySpec::identity();
        assert_eq!(s.f_value(7).unwrap(), 1.0);
        assert_eq!(s.f_factorial(12).unwrap(), SignedLogValue::ONE);
        assert_eq!(s.f_factorial_prefix(3).unwrap(), vec![SignedLogValue::ONE; 4]);
    }

    #[test]
    fn zero_eta_reduces_to_identity() {
        let s = NonlinearitySpec::trapped_ion(0.0).unwrap();
        assert_eq!(s.f_value(3).unwrap(), 1.0);
        let f5 = s.f_factorial(5).unwrap();
        assert_eq!(f5.sign, 1);
        assert_eq!(f5.log_magnitude, 0.0);
        for v in s.f_factorial_prefix(2).unwrap() {
            assert_eq!(v, SignedLogValue::ONE);
        }
    }

    #[test]
    fn trapped_ion_low_orders() {
        let x = 0.04;
        let s = NonlinearitySpec::trapped_ion(0.2).unwrap();
        let f1 = l1_1(x) / (2.0 * l1_0(x));
        let f2 = l2_1(x) / (3.0 * l2_0(x));
        assert!((f1 - 1.96 / 1.92).abs() < 1e-15);
        assert!((s.f_value(1).unwrap() - f1).abs() < 1e-14);
        assert!((s.f_value(2).unwrap() - f2).abs() < 1e-14);
        let prod = s.f_factorial(2).unwrap().to_real();
        assert!((prod - f1 * f2).abs() < 1e-14);
        let prefix = s.f_factorial_prefix(2).unwrap();
        let expect = [1.0, f1, f1 * f2];
        for (p, e) in prefix.iter().zip(expect) {
            assert!((p.to_real() - e).abs() < 1e-14);
        }
    }

    #[test]
    fn prefix_consistency_exact() {
        let s = NonlinearitySpec::trapped_ion(0.3).unwrap();
        let prefix = s.f_factorial_prefix(80).unwrap();
        for (k, p) in prefix.iter().enumerate() {
            assert_eq!(*p, s.f_factorial(k).unwrap());
        }
    }

    #[test]
    fn ratio_recovery() {
        for &eta in &[0.1, 0.2, 0.3] {
            let s = NonlinearitySpec::trapped_ion(eta).unwrap();
            let prefix = s.f_factorial_prefix(100).unwrap();
            for n in 1..=100 {
                let f = s.f_value(n).unwrap();
                if f == 0.0 {
                    continue;
                }
                let ratio = prefix[n].to_real() / prefix[n - 1].to_real();
                assert!((ratio - f).abs() <= 1e-12 * f.abs(), "eta={eta} n={n}");
            }
        }
    }

    #[test]
    fn eta_continuity() {
        let s = NonlinearitySpec::trapped_ion(1e-8).unwrap();
        for n in 0..=20 {
            assert!((s.f_value(n).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn negative_values_are_sign_tracked() {
        // eta = 0.5: L_n^0(0.25) changes sign between n = 4 and n = 5
        let s = NonlinearitySpec::trapped_ion(0.5).unwrap();
        let f = s.f_values(12).unwrap();
        let prefix = s.f_factorial_prefix(12).unwrap();
        let mut sign = 1.0;
        for n in 1..=12 {
            sign *= f[n].signum();
            assert_eq!(f64::from(prefix[n].sign), sign);
        }
        assert!(f.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn singular_denominator_at_laguerre_zero() {
        // L_1^0(1) = 0 exactly
        let s = NonlinearitySpec::trapped_ion(1.0).unwrap();
        assert!(matches!(s.f_value(1), Err(Error::SingularDenominator { n: 1, .. })));
        assert!(matches!(s.f_factorial_prefix(5), Err(Error::SingularDenominator { n: 1, .. })));
        let relaxed = NonlinearitySpec::trapped_ion(0.999).unwrap();
        assert!(relaxed.f_value(1).is_ok());
        let strict = relaxed.with_denom_epsilon(1e-2).unwrap();
        assert!(matches!(strict.f_value(1), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn zero_factor_is_legal() {
        let s = NonlinearitySpec::table(vec![1.5, 0.0, 2.0]).unwrap();
        let p = s.f_factorial_prefix(3).unwrap();
        assert_eq!(p[1].sign, 1);
        assert!(p[2].is_zero() && p[3].is_zero());
    }

    #[test]
    fn table_range() {
        let s = NonlinearitySpec::table(vec![1.0, 2.0]).unwrap();
        assert_eq!(s.f_value(2).unwrap(), 2.0);
        assert_eq!(s.f_value(3), Err(Error::TableExhausted { n: 3, len: 2 }));
        assert!(s.f_factorial_prefix(3).is_err());
    }

    #[test]
    fn table_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# f(k) for k = 1..\n1.25\n\n  0.5  # second\n-2").unwrap();
        let s = NonlinearitySpec::load_table(file.path()).unwrap();
        assert_eq!(s.f_values(3).unwrap(), vec![1.0, 1.25, 0.5, -2.0]);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "1.0\nabc").unwrap();
        let err = NonlinearitySpec::load_table(bad.path()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(NonlinearitySpec::load_table(Path::new("/nonexistent/table.txt")).is_err());
    }

    #[test]
    fn invalid_construction() {
        assert!(NonlinearitySpec::trapped_ion(-0.1).is_err());
        assert!(NonlinearitySpec::trapped_ion(f64::NAN).is_err());
        assert!(NonlinearitySpec::table(vec![1.0, f64::INFINITY]).is_err());
        assert!(NonlinearitySpec::identity().with_denom_epsilon(0.0).is_err());
    }

    proptest! {
        #[test]
        fn signed_log_round_trip(x in prop::num::f64::NORMAL) {
            let back = SignedLogValue::from_real(x).to_real();
            let ulp = f64::EPSILON * x.abs();
            // exp(ln|x|) loses up to ~|ln|x|| ulps for extreme exponents
            let budget = ulp * (1.0 + x.abs().ln().abs());
            prop_assert!((back - x).abs() <= budget, "{x} -> {back}");
        }

        #[test]
        fn signed_log_multiplication(a in -1e6f64..1e6, b in -1e6f64..1e6, c in -1e6f64..1e6) {
            let (x, y, z) = (SignedLogValue::from_real(a), SignedLogValue::from_real(b), SignedLogValue::from_real(c));
            prop_assert_eq!(x * y, y * x);
            let l = (x * y) * z;
            let r = x * (y * z);
            prop_assert_eq!(l.sign, r.sign);
            if !l.is_zero() {
                prop_assert!((l.log_magnitude - r.log_magnitude).abs() < 1e-12);
            }
            prop_assert_eq!(l.sign, (a * b * c).signum() as i8 * i8::from(a * b * c != 0.0));
        }
    }
}
