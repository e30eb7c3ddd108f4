//! Brute-force truncated Fock-space operator algebra.
//!
//! Everything here works with explicit dense matrices and matrix-vector
//! products, independently of the closed-form expansions in
//! [`crate::states`] and the series in [`crate::analysis`]. It is the
//! reference those modules are checked against.
//!
//! Truncating to `dim` levels corrupts operator words near the top of the
//! basis: a product of `k` ladder operators is only exact in rows and
//! columns below `dim - k`. Residual checks therefore look at the
//! "safe block" of indices `< dim - 2`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analysis::{moments_direct, MomentSet};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::states::{build_displacement_state, build_eigenstate, TruncationPolicy};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Rows and columns excluded from residual checks.
pub const SAFE_MARGIN: usize = 2;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub label: String,
    pub entries: CMatrix,
}

impl OperatorMatrix {
    pub fn new(label: impl Into<String>, entries: CMatrix) -> Self {
        OperatorMatrix { label: label.into(), entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn product(&self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix::new(format!("{}{}", self.label, rhs.label), &self.entries * &rhs.entries)
    }

    pub fn commutator(&self, rhs: &OperatorMatrix) -> OperatorMatrix {
        let e = &self.entries * &rhs.entries - &rhs.entries * &self.entries;
        OperatorMatrix::new(format!("[{},{}]", self.label, rhs.label), e)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.entries * v
    }
}

/// Lowering operator `a` on `dim` levels: `(a)_{n,n+1} = sqrt(n+1)`.
pub fn lowering(dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        m[(n, n + 1)] = re(((n + 1) as f64).sqrt());
    }
    m
}

fn diagonal(values: impl Iterator<Item = f64>, dim: usize) -> CMatrix {
    let v: Vec<Complex64> = values.take(dim).map(re).collect();
    CMatrix::from_diagonal(&CVector::from_vec(v))
}

/// `m · diag(d)` without a dense product.
fn times_diagonal(m: &CMatrix, d: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= re(d[j]);
    }
    out
}

/// `diag(d) · m` without a dense product.
fn diagonal_times(d: &[f64], m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= re(d[i]);
    }
    out
}

/// `a, a†, N, A = a f(N), A† = f(N) a†, B = a f(N)⁻¹, B† = f(N)⁻¹ a†`.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pub dim: usize,
    /// `f(0), ..., f(dim)`; the last entry feeds the `[A, A†]` prediction.
    pub f: Vec<f64>,
    pub lower: OperatorMatrix,
    pub raise: OperatorMatrix,
    pub number: OperatorMatrix,
    pub deformed_lower: OperatorMatrix,
    pub deformed_raise: OperatorMatrix,
    pub conjugate_lower: OperatorMatrix,
    pub conjugate_raise: OperatorMatrix,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("oracle dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

/// `A = a f(N)` alone; usable at zeros of `f`.
pub fn deformed_lowering(spec: &NonlinearitySpec, dim: usize) -> Result<CMatrix> {
    check_dim(dim)?;
    let f = spec.f_values(dim - 1)?;
    Ok(times_diagonal(&lowering(dim), &f))
}

pub fn build_operators(spec: &NonlinearitySpec, dim: usize) -> Result<OperatorFamily> {
    check_dim(dim)?;
    let f = spec.f_values(dim)?;
    if let Some(n) = (1..dim).find(|&n| f[n] == 0.0) {
        return Err(Error::ZeroNonlinearity { n });
    }
    let a = lowering(dim);
    let a_dag = a.transpose();
    let f_inv: Vec<f64> = f.iter().map(|v| if *v == 0.0 { 0.0 } else { 1.0 / v }).collect();
    let number = diagonal((0..dim).map(|n| n as f64), dim);
    Ok(OperatorFamily {
        dim,
        deformed_lower: OperatorMatrix::new("A", times_diagonal(&a, &f)),
        deformed_raise: OperatorMatrix::new("A†", diagonal_times(&f, &a_dag)),
        conjugate_lower: OperatorMatrix::new("B", times_diagonal(&a, &f_inv)),
        conjugate_raise: OperatorMatrix::new("B†", diagonal_times(&f_inv, &a_dag)),
        lower: OperatorMatrix::new("a", a),
        raise: OperatorMatrix::new("a†", a_dag),
        number: OperatorMatrix::new("N", number),
        f,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorResiduals {
    pub dim: usize,
    /// `(label, residual matrix)` in a fixed order.
    pub matrices: Vec<(&'static str, CMatrix)>,
}

/// Largest entry modulus among indices `< limit`.
fn block_max(m: &CMatrix, limit: usize) -> f64 {
    let mut max: f64 = 0.0;
    for i in 0..limit {
        for j in 0..limit {
            max = max.max(m[(i, j)].norm());
        }
    }
    max
}

impl CommutatorResiduals {
    /// Max-modulus residual of each relation over the safe block.
    pub fn safe_block_max(&self) -> Vec<(&'static str, f64)> {
        let limit = self.dim.saturating_sub(SAFE_MARGIN);
        self.matrices.iter().map(|(l, m)| (*l, block_max(m, limit))).collect()
    }

    pub fn matrix(&self, label: &str) -> Option<&CMatrix> {
        self.matrices.iter().find(|(l, _)| *l == label).map(|(_, m)| m)
    }
}

pub const COMM_N_A: &str = "[N,A]+A";
pub const COMM_N_ADAG: &str = "[N,A+]-A+";
pub const COMM_A_ADAG: &str = "[A,A+]-((N+1)f^2(N+1)-Nf^2(N))";
pub const COMM_A_BDAG: &str = "[A,B+]-1";
pub const COMM_B_ADAG: &str = "[B,A+]-1";

/// Residual matrices of the five ladder relations.
pub fn commutator_residuals(fam: &OperatorFamily) -> CommutatorResiduals {
    let dim = fam.dim;
    let id = CMatrix::identity(dim, dim);
    let predicted = diagonal(
        (0..dim).map(|n| {
            let nf = n as f64;
            (nf + 1.0) * fam.f[n + 1].powi(2) - nf * fam.f[n].powi(2)
        }),
        dim,
    );
    let matrices = vec![
        (COMM_N_A, fam.number.commutator(&fam.deformed_lower).entries + &fam.deformed_lower.entries),
        (COMM_N_ADAG, fam.number.commutator(&fam.deformed_raise).entries - &fam.deformed_raise.entries),
        (COMM_A_ADAG, fam.deformed_lower.commutator(&fam.deformed_raise).entries - predicted),
        (COMM_A_BDAG, fam.deformed_lower.commutator(&fam.conjugate_raise).entries - &id),
        (COMM_B_ADAG, fam.conjugate_lower.commutator(&fam.deformed_raise).entries - &id),
    ];
    CommutatorResiduals { dim, matrices }
}

/// Safe-block maxima of the five relations, in fixed order.
pub fn check_commutators(fam: &OperatorFamily) -> Vec<(&'static str, f64)> {
    commutator_residuals(fam).safe_block_max()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Displacement {
    /// `exp(β A† - β* B)`
    D,
    /// `exp(β B† - β* A)`
    D1,
}

impl fmt::Display for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Displacement::D => "D",
            Displacement::D1 => "D1",
        })
    }
}

const TAYLOR_MAX_TERMS: usize = 20_000;

/// `exp(M) v` by Taylor summation on the vector.
///
/// Stops once two consecutive terms are below `1e-17` of the running sum
/// (max-norm) and shrinking by at least half per step.
pub fn expm_action(m: &CMatrix, v: &CVector) -> Result<CVector> {
    let mut term = v.clone();
    let mut sum = v.clone();
    let mut prev_norm = term.camax();
    let mut quiet = 0;
    for k in 1..TAYLOR_MAX_TERMS {
        term = (m * &term).unscale(k as f64);
        sum += &term;
        let norm = term.camax();
        let small = norm <= 1e-17 * sum.camax();
        let shrinking = norm <= 0.5 * prev_norm;
        quiet = if small && shrinking { quiet + 1 } else { 0 };
        if quiet >= 2 || norm == 0.0 {
            return Ok(sum);
        }
        prev_norm = norm;
    }
    Err(Error::InvalidArgument(format!("Taylor series for exp(M)v did not converge in {TAYLOR_MAX_TERMS} terms")))
}

/// Generator `β A† - β* B` (D) or `β B† - β* A` (D1).
pub fn displacement_generator(fam: &OperatorFamily, beta: Complex64, which: Displacement) -> CMatrix {
    let (up, down) = match which {
        Displacement::D => (&fam.deformed_raise, &fam.conjugate_lower),
        Displacement::D1 => (&fam.conjugate_raise, &fam.deformed_lower),
    };
    up.entries.map(|x| x * beta) - down.entries.map(|x| x * beta.conj())
}

/// Normalized `D(β)|0>` or `D1(β)|0>` on `dim` levels.
pub fn displace_exact(spec: &NonlinearitySpec, beta: Complex64, which: Displacement, dim: usize) -> Result<CVector> {
    let fam = build_operators(spec, dim)?;
    let gen = displacement_generator(&fam, beta, which);
    let mut vacuum = CVector::zeros(dim);
    vacuum[0] = re(1.0);
    let out = expm_action(&gen, &vacuum)?;
    let out = out.unscale(out.norm());
    let top = dim - dim / 4;
    let mass: f64 = out.iter().skip(top).map(|c| c.norm_sqr()).sum();
    if mass > 1e-10 {
        return Err(Error::TailOverflow { dim, mass });
    }
    Ok(out)
}

fn to_vector(state: &[Complex64], dim: usize) -> CVector {
    CVector::from_iterator(dim, (0..dim).map(|n| state.get(n).copied().unwrap_or_default()))
}

/// `‖(A - α)ψ‖` over the safe block rows.
pub fn eigen_residual(state: &[Complex64], spec: &NonlinearitySpec, alpha: Complex64, dim: usize) -> Result<f64> {
    let a = deformed_lowering(spec, dim)?;
    let psi = to_vector(state, dim);
    let r = &a * &psi - psi.map(|c| c * alpha);
    let limit = dim.saturating_sub(SAFE_MARGIN);
    Ok(r.iter().take(limit).map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

/// `|<u|v>| / (‖u‖‖v‖)`.
pub fn overlap(u: &[Complex64], v: &[Complex64]) -> f64 {
    let dim = u.len().max(v.len());
    let (u, v) = (to_vector(u, dim), to_vector(v, dim));
    u.dotc(&v).norm() / (u.norm() * v.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Lower,
    Raise,
}

/// `<ψ|w|ψ>` for a word of ladder operators, written left to right.
///
/// The state is padded by the word length so no product reaches the
/// truncation edge.
pub fn quadratic_form(state: &[Complex64], word: &[Ladder]) -> Complex64 {
    let dim = state.len() + word.len();
    let a = lowering(dim);
    let a_dag = a.transpose();
    let psi = to_vector(state, dim);
    let mut v = psi.clone();
    for op in word.iter().rev() {
        v = match op {
            Ladder::Lower => &a * v,
            Ladder::Raise => &a_dag * v,
        };
    }
    psi.dotc(&v)
}

pub mod words {
    use super::Ladder::{self, Lower as L, Raise as R};

    pub const A: &[Ladder] = &[L];
    pub const A2: &[Ladder] = &[L, L];
    pub const A4: &[Ladder] = &[L, L, L, L];
    pub const NUMBER: &[Ladder] = &[R, L];
    pub const A2DAG_A2: &[Ladder] = &[R, R, L, L];
    pub const A2_A2DAG: &[Ladder] = &[L, L, R, R];
}

/// [`MomentSet`] from quadratic forms.
pub fn moments(state: &[Complex64]) -> MomentSet {
    MomentSet {
        mean_a: quadratic_form(state, words::A),
        mean_a2: quadratic_form(state, words::A2),
        mean_a4: quadratic_form(state, words::A4),
        nbar: quadratic_form(state, words::NUMBER).re,
        a2dag_a2: quadratic_form(state, words::A2DAG_A2).re,
    }
}

/// `|<a²a†²> - <a†²a²> - 4<a†a> - 2|`.
pub fn normal_order_residual(state: &[Complex64]) -> f64 {
    let anti = quadratic_form(state, words::A2_A2DAG);
    let normal = quadratic_form(state, words::A2DAG_A2);
    let n = quadratic_form(state, words::NUMBER);
    (anti - normal - n * 4.0 - 2.0).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyLine {
    pub name: String,
    pub value: f64,
    /// `None` for informational lines.
    pub limit: Option<f64>,
}

impl VerifyLine {
    pub fn passed(&self) -> bool {
        self.limit.is_none_or(|l| self.value < l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<VerifyLine>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(VerifyLine::passed)
    }
}

pub const COMMUTATOR_LIMIT: f64 = 1e-10;
pub const EIGEN_LIMIT: f64 = 1e-9;
pub const BCH_LIMIT: f64 = 1e-8;
pub const MOMENT_LIMIT: f64 = 1e-10;

fn max_moment_gap(a: &MomentSet, b: &MomentSet) -> f64 {
    [
        (a.mean_a - b.mean_a).norm(),
        (a.mean_a2 - b.mean_a2).norm(),
        (a.mean_a4 - b.mean_a4).norm(),
        (a.nbar - b.nbar).abs(),
        (a.a2dag_a2 - b.a2dag_a2).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// The full residual battery at one `(spec, dim, amplitude)`.
pub fn verify_battery(
    spec: &NonlinearitySpec,
    dim: usize,
    amplitude: Complex64,
    policy: &TruncationPolicy,
) -> Result<VerifyReport> {
    let fam = build_operators(spec, dim)?;
    let mut lines = Vec::new();
    let mut push = |name: String, value: f64, limit: Option<f64>| lines.push(VerifyLine { name, value, limit });

    for (label, value) in check_commutators(&fam) {
        push(format!("comm.{label}"), value, Some(COMMUTATOR_LIMIT));
    }

    let eig = build_eigenstate(spec, amplitude, policy)?;
    let disp = build_displacement_state(spec, amplitude, policy)?;
    push("eigen.residual".into(), eigen_residual(&eig.coeffs, spec, amplitude, dim)?, Some(EIGEN_LIMIT));

    let d = displace_exact(spec, amplitude, Displacement::D, dim)?;
    let d1 = displace_exact(spec, amplitude, Displacement::D1, dim)?;
    push("bch.D.infidelity".into(), 1.0 - overlap(d.as_slice(), &disp.coeffs), Some(BCH_LIMIT));
    push("bch.D1.infidelity".into(), 1.0 - overlap(d1.as_slice(), &eig.coeffs), Some(BCH_LIMIT));

    push("normal_order.residual".into(), normal_order_residual(&disp.coeffs), Some(MOMENT_LIMIT));
    push(
        "moments.displacement.max_gap".into(),
        max_moment_gap(&moments(&disp.coeffs), &moments_direct(&disp)),
        Some(MOMENT_LIMIT),
    );
    push(
        "moments.eigenstate.max_gap".into(),
        max_moment_gap(&moments(&eig.coeffs), &moments_direct(&eig)),
        Some(MOMENT_LIMIT),
    );
    push("info.eigen_residual_of_displacement_state".into(), eigen_residual(&disp.coeffs, spec, amplitude, dim)?, None);
    Ok(VerifyReport { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ti(eta: f64) -> NonlinearitySpec {
        NonlinearitySpec::trapped_ion(eta).unwrap()
    }

    #[test]
    fn ladder_exactness() {
        let fam = build_operators(&NonlinearitySpec::identity(), 4).unwrap();
        assert_eq!(fam.deformed_lower.entries, fam.lower.entries);
        assert_eq!(fam.lower.entries[(0, 1)], re(1.0));
        assert_eq!(fam.lower.entries[(1, 2)], re(2f64.sqrt()));
        assert_eq!(fam.lower.entries[(2, 3)], re(3f64.sqrt()));
        assert_eq!(fam.raise.entries, fam.lower.entries.transpose());
        for n in 0..4 {
            assert_eq!(fam.number.entries[(n, n)], re(n as f64));
        }
    }

    #[test]
    fn zero_eta_operators_coincide() {
        let fam = build_operators(&ti(0.0), 8).unwrap();
        assert_eq!(fam.deformed_lower.entries, fam.lower.entries);
        assert_eq!(fam.conjugate_lower.entries, fam.lower.entries);
    }

    #[test]
    fn deformed_matrix_elements() {
        let spec = ti(0.2);
        let fam = build_operators(&spec, 16).unwrap();
        for n in 0..15 {
            let expect = ((n + 1) as f64).sqrt() * spec.f_value(n + 1).unwrap();
            assert!((fam.deformed_lower.entries[(n, n + 1)].re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn commutators_identity_and_trapped_ion() {
        let id = build_operators(&NonlinearitySpec::identity(), 16).unwrap();
        for (l, v) in check_commutators(&id) {
            assert!(v < 1e-12, "{l}: {v}");
        }
        let fam = build_operators(&ti(0.2), 32).unwrap();
        let res = check_commutators(&fam);
        assert!(res.iter().find(|(l, _)| *l == COMM_A_BDAG).unwrap().1 < 1e-10);
    }

    #[test]
    fn truncation_corner_is_nonzero() {
        for spec in [NonlinearitySpec::identity(), ti(0.2)] {
            let fam = build_operators(&spec, 12).unwrap();
            let res = commutator_residuals(&fam);
            let m = res.matrix(COMM_A_ADAG).unwrap();
            assert!(m[(11, 11)].norm() > 0.5);
        }
    }

    #[test]
    fn zero_of_f_blocks_conjugates() {
        let spec = NonlinearitySpec::table(vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(build_operators(&spec, 4).unwrap_err(), Error::ZeroNonlinearity { n: 2 });
        assert!(deformed_lowering(&spec, 4).is_ok());
    }

    #[test]
    fn displacement_of_vacuum() {
        let v = displace_exact(&ti(0.2), re(0.0), Displacement::D, 16).unwrap();
        assert_eq!(v[0], re(1.0));
        assert!(v.iter().skip(1).all(|c| c.norm() == 0.0));

        let v = displace_exact(&NonlinearitySpec::identity(), re(0.5), Displacement::D, 32).unwrap();
        let mut fact = 1.0;
        for n in 0..20 {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = (-0.125f64).exp() * 0.5f64.powi(n) / fact.sqrt();
            assert!((v[n as usize] - expect).norm() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn tail_overflow_detected() {
        let err = displace_exact(&NonlinearitySpec::identity(), re(3.0), Displacement::D, 12).unwrap_err();
        assert!(matches!(err, Error::TailOverflow { dim: 12, .. }));
    }

    #[test]
    fn quadratic_forms() {
        assert_eq!(quadratic_form(&[re(1.0)], words::NUMBER), re(0.0));
        let p = TruncationPolicy::default();
        let coh = build_displacement_state(&NonlinearitySpec::identity(), re(0.5), &p).unwrap();
        assert!((quadratic_form(&coh.coeffs, words::A2DAG_A2) - 0.0625).norm() < 1e-14);
        let st = build_displacement_state(&ti(0.2), re(0.5), &p).unwrap();
        assert!(normal_order_residual(&st.coeffs) < 1e-10);
    }

    #[test]
    fn families_are_distinct() {
        let p = TruncationPolicy::default();
        let spec = ti(0.2);
        let eig = build_eigenstate(&spec, re(0.5), &p).unwrap();
        let disp = build_displacement_state(&spec, re(0.5), &p).unwrap();
        assert!(eigen_residual(&eig.coeffs, &spec, re(0.5), 64).unwrap() < 1e-9);
        assert!(eigen_residual(&disp.coeffs, &spec, re(0.5), 64).unwrap() > 1e-4);
    }

    #[test]
    fn battery_passes_for_identity() {
        let r = verify_battery(&NonlinearitySpec::identity(), 16, re(0.5), &TruncationPolicy::default()).unwrap();
        for l in &r.lines {
            assert!(l.passed(), "{} = {}", l.name, l.value);
        }
    }
}
