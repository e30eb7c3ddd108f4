//! `%g`-style float rendering with a fixed number of significant digits.

/// Renders `x` like C's `%.{sig}g`: fixed notation when the decimal exponent
/// lies in `[-4, sig)`, scientific otherwise, trailing zeros stripped.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}{:02}", strip_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Shortest text that parses back to exactly `x`, in plain or exponent
/// notation, whichever is shorter.
pub fn fmt_exact(x: f64) -> String {
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() { sci } else { plain }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::{fmt_exact, fmt_sig};

    #[test]
    fn exact_round_trips() {
        assert_eq!(fmt_exact(0.2), "0.2");
        assert_eq!(fmt_exact(1e-16), "1e-16");
        assert_eq!(fmt_exact(1.0), "1");
        assert_eq!(fmt_exact(4096.0), "4096");
        for x in [0.1 + 0.2, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(fmt_exact(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(1.0, 12), "1");
        assert_eq!(fmt_sig(0.25, 12), "0.25");
        assert_eq!(fmt_sig(-1.0 / 3.0, 12), "-0.333333333333");
        assert_eq!(fmt_sig(123456.789, 12), "123456.789");
        assert_eq!(fmt_sig(1.5e-7, 12), "1.5e-07");
        assert_eq!(fmt_sig(2.0e13, 12), "2e+13");
        assert_eq!(fmt_sig(9.9999999999999e-5, 12), "0.0001");
        assert_eq!(fmt_sig(1e-5, 3), "1e-05");
        assert_eq!(fmt_sig(123.0, 2), "1.2e+02");
    }
}
