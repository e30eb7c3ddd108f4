//! Moment series, direct moments and nonclassicality indicators.
//!
//! For the displacement-type state with real amplitude `beta`, five series
//!
//! ```text
//! I1 = c^2 Σ β^{2n} f(n)! f(n+1)! / n!
//! I2 = c^2 Σ β^{2n} f(n)! f(n+2)! / n!
//! I3 = c^2 Σ β^{2(n+1)} [f(n+1)!]^2 / n!
//! I4 = c^2 Σ β^{2n} [f(n+2)!]^2 / n!
//! I5 = c^2 Σ β^{2n} f(n)! f(n+4)! / n!
//! ```
//!
//! with `c^{-2} = Σ β^{2n} [f(n)!]^2 / n!` express the moments:
//! `<a> = β I1`, `<a²> = β² I2`, `<a†a> = I3`, `<a⁴> = β⁴ I5`, and
//! `<a†²a²> = β⁴ I4`. The last identity is often quoted without the `β⁴`;
//! [`reconcile_series`] tests both readings against direct sums.
//!
//! Squeezing verdicts always come from first-principles variances computed
//! out of [`MomentSet`]. The combinations `F1, G1, F2, G2` and `I4/I3²` are
//! reported alongside, evaluated literally from the series.

use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::nonlinearity::{NonlinearitySpec, SignedLogValue};
use crate::specfun::log_factorial;
use crate::states::{build_state, certify, signed_sum, Family, StateExpansion, TruncationPolicy};

/// Relative tolerance for a series identity to count as holding.
pub const RECONCILE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub terms_used: usize,
    pub spec: NonlinearitySpec,
    pub family: Family,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mean_a: Complex64,
    pub mean_a2: Complex64,
    pub mean_a4: Complex64,
    pub nbar: f64,
    pub a2dag_a2: f64,
}

/// `f(n)!` for the displacement family, `1/f(n)!` for the eigenstate family.
///
/// The eigenstate family is the displacement family of the reciprocal
/// nonlinearity, so the same series describe both.
fn family_factorials(family: Family, spec: &NonlinearitySpec, n_max: usize) -> Result<Vec<SignedLogValue>> {
    let prefix = spec.f_factorial_prefix(n_max)?;
    match family {
        Family::Displacement => Ok(prefix),
        Family::Eigenstate => prefix
            .iter()
            .enumerate()
            .map(|(n, v)| v.recip().ok_or(Error::ZeroNonlinearity { n }))
            .collect(),
    }
}

/// `(β²)^k` in signed-log form, with `0^0 = 1`.
fn beta_sq_pow(log_beta_sq: f64, k: usize) -> SignedLogValue {
    if k == 0 {
        SignedLogValue::ONE
    } else if log_beta_sq == f64::NEG_INFINITY {
        SignedLogValue::ZERO
    } else {
        SignedLogValue { sign: 1, log_magnitude: k as f64 * log_beta_sq }
    }
}

fn inv_factorial(n: usize) -> SignedLogValue {
    SignedLogValue { sign: 1, log_magnitude: -log_factorial(n) }
}

/// Series `I1..I5` for real `beta`, each as printed including `c²`.
pub fn series(spec: &NonlinearitySpec, beta: f64, policy: &TruncationPolicy) -> Result<SeriesSet> {
    series_for_family(Family::Displacement, spec, beta, policy)
}

/// [`series`] for either family; the eigenstate family substitutes `1/f(n)!`.
pub fn series_for_family(
    family: Family,
    spec: &NonlinearitySpec,
    beta: f64,
    policy: &TruncationPolicy,
) -> Result<SeriesSet> {
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite, got {beta}")));
    }
    let log_b2 = (beta * beta).ln();
    let mut ff = Vec::new();
    let (weights, _) = certify(beta.abs(), policy, |n_max| {
        ff = family_factorials(family, spec, n_max + 4)?;
        Ok((0..=n_max)
            .map(|n| {
                let w = beta_sq_pow(log_b2, n) * ff[n].powi(2) * inv_factorial(n);
                if w.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    w.log_magnitude
                }
            })
            .collect())
    })?;
    let n_max = weights.len() - 1;
    let collect = |term: &dyn Fn(usize) -> SignedLogValue| (0..=n_max).map(term).collect::<Vec<_>>();
    let norm = signed_sum(&collect(&|n| beta_sq_pow(log_b2, n) * ff[n].powi(2) * inv_factorial(n)));
    let ratio = |terms: Vec<SignedLogValue>| {
        let (acc, shift) = signed_sum(&terms);
        if acc == 0.0 {
            0.0
        } else {
            acc / norm.0 * (shift - norm.1).exp()
        }
    };
    let i1 = ratio(collect(&|n| beta_sq_pow(log_b2, n) * ff[n] * ff[n + 1] * inv_factorial(n)));
    let i2 = ratio(collect(&|n| beta_sq_pow(log_b2, n) * ff[n] * ff[n + 2] * inv_factorial(n)));
    let i3 = ratio(collect(&|n| beta_sq_pow(log_b2, n + 1) * ff[n + 1].powi(2) * inv_factorial(n)));
    let i4 = ratio(collect(&|n| beta_sq_pow(log_b2, n) * ff[n + 2].powi(2) * inv_factorial(n)));
    let i5 = ratio(collect(&|n| beta_sq_pow(log_b2, n) * ff[n] * ff[n + 4] * inv_factorial(n)));
    Ok(SeriesSet { i1, i2, i3, i4, i5, terms_used: n_max + 1, spec: spec.clone(), family, beta })
}

/// `<a^k>` over the stored coefficients.
fn lowering_moment(c: &[Complex64], k: usize) -> Complex64 {
    (0..c.len().saturating_sub(k))
        .map(|n| {
            let sqrt_ratio: f64 = (n + 1..=n + k).map(|m| (m as f64).sqrt()).product();
            c[n].conj() * c[n + k] * sqrt_ratio
        })
        .sum()
}

/// Moments by direct summation over the number-basis coefficients.
pub fn moments_direct(state: &StateExpansion) -> MomentSet {
    moments_of_coefficients(&state.coeffs)
}

pub fn moments_of_coefficients(c: &[Complex64]) -> MomentSet {
    let mut nbar = 0.0;
    let mut a2dag_a2 = 0.0;
    for (n, cn) in c.iter().enumerate() {
        let p = cn.norm_sqr();
        let nf = n as f64;
        nbar += nf * p;
        a2dag_a2 += nf * (nf - 1.0) * p;
    }
    MomentSet {
        mean_a: lowering_moment(c, 1),
        mean_a2: lowering_moment(c, 2),
        mean_a4: lowering_moment(c, 4),
        nbar,
        a2dag_a2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A4Reading {
    /// `<a†²a²> = I4`
    AsPrinted,
    /// `<a†²a²> = β⁴ I4`
    BetaFourth,
    /// Both readings hold (|β| = 1); the data cannot distinguish them.
    Both,
    Neither,
}

impl fmt::Display for A4Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            A4Reading::AsPrinted => "as_printed",
            A4Reading::BetaFourth => "beta4_I4",
            A4Reading::Both => "ambiguous",
            A4Reading::Neither => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileRow {
    pub label: &'static str,
    pub lhs: Complex64,
    pub rhs: f64,
    /// `None` when the identity carries a `β⁻ᵏ` prefactor and `β = 0`.
    pub residual: Option<f64>,
}

impl ReconcileRow {
    pub fn holds(&self) -> bool {
        self.residual.is_none_or(|r| r < RECONCILE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciliation {
    pub rows: Vec<ReconcileRow>,
    pub a4_reading: A4Reading,
}

impl Reconciliation {
    pub fn row(&self, label: &str) -> Option<&ReconcileRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Rows for A1, A2, A3, A5 plus whichever A4 reading was flagged.
    pub fn flagged_rows(&self) -> Vec<&ReconcileRow> {
        self.rows
            .iter()
            .filter(|r| match r.label {
                "A4_printed" => matches!(self.a4_reading, A4Reading::AsPrinted | A4Reading::Both),
                "A4_beta4" => matches!(self.a4_reading, A4Reading::BetaFourth | A4Reading::Both),
                _ => true,
            })
            .collect()
    }

    /// Largest residual over [`Self::flagged_rows`].
    pub fn max_flagged_residual(&self) -> f64 {
        self.flagged_rows().iter().filter_map(|r| r.residual).fold(0.0, f64::max)
    }
}

fn relative_residual(lhs: Complex64, rhs: f64) -> f64 {
    let scale = lhs.norm().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).norm() / scale
    }
}

/// Residuals of the candidate series identities against direct moments.
pub fn reconcile_series(series: &SeriesSet, direct: &MomentSet, beta: f64) -> Reconciliation {
    let b = beta;
    let degenerate = beta == 0.0;
    let row = |label, lhs: Complex64, rhs: f64, needs_inverse: bool| ReconcileRow {
        label,
        lhs,
        rhs,
        residual: if needs_inverse && degenerate { None } else { Some(relative_residual(lhs, rhs)) },
    };
    let a2a2 = Complex64::new(direct.a2dag_a2, 0.0);
    let rows = vec![
        row("A1", direct.mean_a, b * series.i1, true),
        row("A2", direct.mean_a2, b.powi(2) * series.i2, true),
        row("A3", Complex64::new(direct.nbar, 0.0), series.i3, false),
        row("A4_printed", a2a2, series.i4, false),
        row("A4_beta4", a2a2, b.powi(4) * series.i4, false),
        row("A5", direct.mean_a4, b.powi(4) * series.i5, true),
    ];
    let printed = rows[3].holds();
    let power_counted = rows[4].holds();
    let a4_reading = match (printed, power_counted) {
        (true, true) => A4Reading::Both,
        (true, false) => A4Reading::AsPrinted,
        (false, true) => A4Reading::BetaFourth,
        (false, false) => A4Reading::Neither,
    };
    Reconciliation { rows, a4_reading }
}

/// First-principles variances of the quadratures `X1 = (a + a†)/2`,
/// `Y1 = (a - a†)/2i` and amplitude-squared quadratures
/// `X2 = (a² + a†²)/2`, `Y2 = (a² - a†²)/2i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variances {
    pub var_x1: f64,
    pub var_y1: f64,
    pub var_x2: f64,
    pub var_y2: f64,
    /// `|<[X2, Y2]>| / 2 = <a†a> + 1/2`.
    pub comm_bound: f64,
}

impl Variances {
    pub fn from_moments(m: &MomentSet) -> Self {
        let n = m.nbar;
        let var_x1 = 0.25 * (2.0 * m.mean_a2.re + 2.0 * n + 1.0) - m.mean_a.re.powi(2);
        let var_y1 = 0.25 * (-2.0 * m.mean_a2.re + 2.0 * n + 1.0) - m.mean_a.im.powi(2);
        // <a² a†²> = <a†² a²> + 4<a†a> + 2
        let anti = m.a2dag_a2 + 4.0 * n + 2.0;
        let var_x2 = 0.25 * (2.0 * m.mean_a4.re + m.a2dag_a2 + anti) - m.mean_a2.re.powi(2);
        let var_y2 = 0.25 * (-2.0 * m.mean_a4.re + m.a2dag_a2 + anti) - m.mean_a2.im.powi(2);
        Variances { var_x1, var_y1, var_x2, var_y2, comm_bound: n + 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport {
    pub f1: f64,
    pub g1: f64,
    pub f2_printed: f64,
    pub g2_printed_indicator: f64,
    pub var_x1: f64,
    pub var_y1: f64,
    pub var_x2: f64,
    pub var_y2: f64,
    pub comm_bound: f64,
    /// `<a†²a²> / <a†a>²`; absent for the vacuum.
    pub g2_true: Option<f64>,
    /// `I4 / I3²`; absent when `I3 = 0`.
    pub g2_printed: Option<f64>,
    pub squeezed_x1: bool,
    pub squeezed_y1: bool,
    pub squeezed_x2: bool,
    pub squeezed_y2: bool,
    pub sub_poissonian: bool,
}

impl SqueezingReport {
    pub fn g2(&self) -> Result<f64> {
        self.g2_true.ok_or(Error::UndefinedG2)
    }

    pub fn uncertainty_products(&self) -> (f64, f64) {
        (self.var_x1 * self.var_y1, self.var_x2 * self.var_y2)
    }
}

pub fn squeezing_report(series: &SeriesSet, direct: &MomentSet, beta: f64) -> SqueezingReport {
    let s = series;
    let b2 = beta * beta;
    let b4 = b2 * b2;
    let v = Variances::from_moments(direct);
    let g2_true = (direct.nbar > 0.0).then(|| direct.a2dag_a2 / direct.nbar.powi(2));
    SqueezingReport {
        f1: b2 * s.i2 + s.i3 - 2.0 * b2 * s.i1 * s.i1,
        g1: s.i3 - b2 * s.i2,
        f2_printed: b4 * s.i4 + s.i5 - s.i2 * s.i2,
        g2_printed_indicator: s.i5 - b4 * s.i4,
        var_x1: v.var_x1,
        var_y1: v.var_y1,
        var_x2: v.var_x2,
        var_y2: v.var_y2,
        comm_bound: v.comm_bound,
        g2_true,
        g2_printed: (s.i3 != 0.0).then(|| s.i4 / (s.i3 * s.i3)),
        squeezed_x1: v.var_x1 < 0.25,
        squeezed_y1: v.var_y1 < 0.25,
        squeezed_x2: v.var_x2 < v.comm_bound,
        squeezed_y2: v.var_y2 < v.comm_bound,
        sub_poissonian: g2_true.is_some_and(|g| g < 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    Singular,
    Divergent,
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointStatus::Ok => "ok",
            PointStatus::Singular => "singular",
            PointStatus::Divergent => "divergent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub state: StateExpansion,
    pub series: SeriesSet,
    pub moments: MomentSet,
    pub report: SqueezingReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub beta: f64,
    pub outcome: std::result::Result<SweepPoint, Error>,
}

impl SweepRecord {
    pub fn status(&self) -> PointStatus {
        match &self.outcome {
            Ok(_) => PointStatus::Ok,
            Err(Error::Divergence { .. }) => PointStatus::Divergent,
            Err(_) => PointStatus::Singular,
        }
    }

    pub fn point(&self) -> Option<&SweepPoint> {
        self.outcome.as_ref().ok()
    }
}

/// Everything the sweep computes at one real amplitude.
pub fn evaluate_point(family: Family, spec: &NonlinearitySpec, beta: f64, policy: &TruncationPolicy) -> Result<SweepPoint> {
    let state = build_state(family, spec, Complex64::new(beta, 0.0), policy)?;
    let series = series_for_family(family, spec, beta, policy)?;
    let moments = moments_direct(&state);
    let report = squeezing_report(&series, &moments, beta);
    Ok(SweepPoint { state, series, moments, report })
}

/// `steps` evenly spaced amplitudes from `min` to `max` inclusive.
pub fn beta_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !min.is_finite() || !max.is_finite() || min > max {
        return Err(Error::InvalidArgument(format!("bad beta grid: min={min} max={max} steps={steps}")));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let span = max - min;
    let last = steps - 1;
    Ok((0..steps)
        .map(|k| if k == last { max } else { min + span * k as f64 / last as f64 })
        .collect())
}

/// Evaluates every grid point; per-point failures are kept in the record.
pub fn sweep(family: Family, spec: &NonlinearitySpec, betas: &[f64], policy: &TruncationPolicy) -> Result<Vec<SweepRecord>> {
    if betas.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt())) {
        return Err(Error::InvalidArgument("beta grid must be non-decreasing".into()));
    }
    Ok(betas
        .par_iter()
        .map(|&beta| SweepRecord { beta, outcome: evaluate_point(family, spec, beta, policy) })
        .collect())
}

pub const SWEEP_HEADER: &str =
    "beta,eta,F1,G1,F2_printed,G2_printed,var_X1,var_Y1,var_X2,var_Y2,comm_bound,g2_true,g2_printed,nbar,status";

fn cell(x: f64) -> String {
    fmt_sig(x, 12)
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], eta: f64, mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for rec in records {
        let head = format!("{},{}", cell(rec.beta), cell(eta));
        match rec.point() {
            Some(p) => {
                let r = &p.report;
                writeln!(
                    w,
                    "{head},{},{},{},{},{},{},{},{},{},{},{},{},ok",
                    cell(r.f1),
                    cell(r.g1),
                    cell(r.f2_printed),
                    cell(r.g2_printed_indicator),
                    cell(r.var_x1),
                    cell(r.var_y1),
                    cell(r.var_x2),
                    cell(r.var_y2),
                    cell(r.comm_bound),
                    opt_cell(r.g2_true),
                    opt_cell(r.g2_printed),
                    cell(p.moments.nbar),
                )?;
            }
            None => writeln!(w, "{head}{}{}", ",".repeat(13), rec.status())?,
        }
    }
    Ok(())
}

/// Convenience for callers holding a state but no series.
pub fn variances_of(state: &StateExpansion) -> Variances {
    Variances::from_moments(&moments_direct(state))
}
