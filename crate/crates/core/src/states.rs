//! Number-basis expansions of the two nonlinear coherent state families.
//!
//! * [`Family::Eigenstate`]: right eigenstates of `A = a f(N)`,
//!   `c_n ∝ z^n / (sqrt(n!) f(n)!)`. The same expansion is produced by the
//!   dual displacement operator `exp(z B† - z* A)` acting on the vacuum.
//! * [`Family::Displacement`]: `exp(z A† - z* B)|0>`,
//!   `c_n ∝ z^n f(n)! / sqrt(n!)`.
//!
//! Coefficients are assembled as signed logarithms and only exponentiated
//! after the running maximum is removed, so `f(n)!` may span hundreds of
//! decades without overflow.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::nonlinearity::{NonlinearitySpec, SignedLogValue};
use crate::specfun::log_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Eigenstate,
    Displacement,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Eigenstate => "eigenstate",
            Family::Displacement => "displacement",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigenstate" => Ok(Family::Eigenstate),
            "displacement" => Ok(Family::Displacement),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

/// Adaptive truncation rule for the infinite number-basis sums.
///
/// Starts at `max(min_start, ceil(8|z|^2))` and doubles up to `n_hard`
/// until the last `window` relative weights are each below `tail_tol`,
/// decay with ratio below `decay_ratio`, and their geometric tail bound is
/// below `tail_tol` as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub min_start: usize,
    pub tail_tol: f64,
    pub n_hard: usize,
    pub window: usize,
    pub decay_ratio: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { min_start: 32, tail_tol: 1e-16, n_hard: 4096, window: 8, decay_ratio: 0.9 }
    }
}

impl TruncationPolicy {
    pub fn with_tail_tol(self, tail_tol: f64) -> Self {
        TruncationPolicy { tail_tol, ..self }
    }

    pub fn with_n_hard(self, n_hard: usize) -> Self {
        TruncationPolicy { n_hard, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol)));
        }
        if self.window < 2 || self.n_hard < self.window {
            return Err(Error::InvalidArgument(format!(
                "n_hard ({}) must be at least the tail window ({} >= 2)",
                self.n_hard, self.window
            )));
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!("decay_ratio must lie in (0, 1), got {}", self.decay_ratio)));
        }
        Ok(())
    }

    fn start(&self, modulus: f64) -> usize {
        let by_amplitude = (8.0 * modulus * modulus).ceil();
        let start = if by_amplitude.is_finite() { by_amplitude.max(self.min_start as f64) } else { f64::MAX };
        (start.min(self.n_hard as f64) as usize).max(self.window)
    }
}

/// Log of a sum of signed terms, returned as `(sum / e^shift, shift)`.
pub(crate) fn signed_sum(terms: &[SignedLogValue]) -> (f64, f64) {
    let shift = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| t.log_magnitude)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    let acc = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| f64::from(t.sign) * (t.log_magnitude - shift).exp())
        .sum();
    (acc, shift)
}

/// `ln(sum exp(l_k))` over the finite entries.
fn log_sum_exp(logs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.map(|l| (l - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TailCheck {
    pub passed: bool,
    pub estimate: f64,
}

/// Examines the last `window` log-weights relative to their total.
pub(crate) fn check_tail(log_weights: &[f64], policy: &TruncationPolicy) -> TailCheck {
    let total = log_sum_exp(log_weights.iter().copied());
    let n = log_weights.len();
    let w = policy.window.min(n);
    let rel: Vec<f64> = log_weights[n - w..].iter().map(|l| (l - total).exp()).collect();
    let mut passed = rel.iter().all(|&p| p < policy.tail_tol);
    let mut ratio: f64 = 0.0;
    for pair in rel.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        if next == 0.0 {
            continue;
        }
        if prev == 0.0 {
            passed = false;
        } else {
            ratio = ratio.max(next / prev);
        }
    }
    let last = *rel.last().unwrap_or(&0.0);
    let estimate = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    passed &= ratio < policy.decay_ratio && estimate <= policy.tail_tol;
    TailCheck { passed, estimate }
}

/// Runs the doubling loop. `log_weight(n_max)` returns the pre-normalization
/// log-weights `ln|c_n|^2` for `n = 0..=n_max`; `NEG_INFINITY` marks exact zeros.
pub(crate) fn certify<F>(modulus: f64, policy: &TruncationPolicy, mut log_weight: F) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    policy.validate()?;
    if modulus == 0.0 {
        return Ok((log_weight(0)?, 0.0));
    }
    let mut n = policy.start(modulus);
    loop {
        let weights = log_weight(n)?;
        let check = check_tail(&weights, policy);
        if check.passed {
            return Ok((weights, check.estimate));
        }
        if n >= policy.n_hard {
            return Err(Error::Divergence { n_max: n, tail: check.estimate });
        }
        n = (2 * n).min(policy.n_hard);
    }
}

/// Normalized number-basis coefficients of a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateExpansion {
    pub family: Family,
    pub amplitude: Complex64,
    pub spec: NonlinearitySpec,
    pub coeffs: Vec<Complex64>,
    pub truncation_n: usize,
    /// Bound on the discarded relative weight beyond `truncation_n`.
    pub tail_estimate: f64,
    /// `ln` of the pre-normalization weight sum (`-2 ln C` or `-2 ln c`).
    pub norm_log: f64,
}

/// `ln|c_n|` and signs of the unnormalized coefficients, without the phase.
fn log_coefficients(family: Family, modulus: f64, ffact: &[SignedLogValue]) -> Result<Vec<SignedLogValue>> {
    let log_mod = modulus.ln();
    ffact
        .iter()
        .enumerate()
        .map(|(n, ff)| {
            let power = if n == 0 { 0.0 } else { n as f64 * log_mod };
            let base = SignedLogValue { sign: 1, log_magnitude: power - 0.5 * log_factorial(n) };
            let factor = match family {
                Family::Displacement => *ff,
                Family::Eigenstate => ff.recip().ok_or_else(|| first_zero(ffact))?,
            };
            Ok(base * factor)
        })
        .collect()
}

fn first_zero(ffact: &[SignedLogValue]) -> Error {
    let n = ffact.iter().position(|v| v.is_zero()).unwrap_or(0);
    Error::ZeroNonlinearity { n }
}

fn build(family: Family, spec: &NonlinearitySpec, z: Complex64, policy: &TruncationPolicy) -> Result<StateExpansion> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude must be finite, got {z}")));
    }
    let modulus = z.norm();
    let mut logs = Vec::new();
    let (weights, tail_estimate) = certify(modulus, policy, |n_max| {
        let ffact = spec.f_factorial_prefix(n_max)?;
        logs = log_coefficients(family, modulus, &ffact)?;
        Ok(logs
            .iter()
            .map(|c| if c.is_zero() { f64::NEG_INFINITY } else { 2.0 * c.log_magnitude })
            .collect())
    })?;
    let norm_log = log_sum_exp(weights.iter().copied());
    let phase = z.arg();
    let coeffs = logs
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if c.is_zero() {
                Complex64::new(0.0, 0.0)
            } else {
                let m = f64::from(c.sign) * (c.log_magnitude - 0.5 * norm_log).exp();
                Complex64::from_polar(m, n as f64 * phase)
            }
        })
        .collect::<Vec<_>>();
    Ok(StateExpansion {
        family,
        amplitude: z,
        spec: spec.clone(),
        truncation_n: coeffs.len() - 1,
        coeffs,
        tail_estimate,
        norm_log,
    })
}

/// Eigenstate of `A = a f(N)` with eigenvalue `alpha`.
pub fn build_eigenstate(spec: &NonlinearitySpec, alpha: Complex64, policy: &TruncationPolicy) -> Result<StateExpansion> {
    build(Family::Eigenstate, spec, alpha, policy)
}

/// `exp(beta A† - beta* B)|0>`, normalized.
pub fn build_displacement_state(
    spec: &NonlinearitySpec,
    beta: Complex64,
    policy: &TruncationPolicy,
) -> Result<StateExpansion> {
    build(Family::Displacement, spec, beta, policy)
}

pub fn build_state(
    family: Family,
    spec: &NonlinearitySpec,
    z: Complex64,
    policy: &TruncationPolicy,
) -> Result<StateExpansion> {
    build(family, spec, z, policy)
}

#[derive(Serialize)]
struct Header<'a> {
    family: Family,
    amplitude: [f64; 2],
    kind: &'a str,
    eta: f64,
    truncation_n: usize,
    tail_estimate: f64,
}

impl StateExpansion {
    /// `c_n`, exactly zero beyond the truncation.
    pub fn coefficient(&self, n: usize) -> Complex64 {
        self.coeffs.get(n).copied().unwrap_or_default()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn mean_occupation(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    /// Coefficients padded with zeros (or cut) to `dim` entries.
    pub fn to_vector(&self, dim: usize) -> Vec<Complex64> {
        (0..dim).map(|n| self.coefficient(n)).collect()
    }

    /// One `#` line of JSON metadata, then `n,re_c,im_c,prob` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = Header {
            family: self.family,
            amplitude: [self.amplitude.re, self.amplitude.im],
            kind: self.spec.kind_name(),
            eta: self.spec.eta(),
            truncation_n: self.truncation_n,
            tail_estimate: self.tail_estimate,
        };
        writeln!(w, "# {}", serde_json::to_string(&header).map_err(io::Error::other)?)?;
        writeln!(w, "n,re_c,im_c,prob")?;
        for (n, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{},{},{},{}", n, fmt_sig(c.re, 17), fmt_sig(c.im, 17), fmt_sig(c.norm_sqr(), 17))?;
        }
        Ok(())
    }
}
