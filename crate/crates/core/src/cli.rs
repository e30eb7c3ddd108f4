//! `nlcs` command line: `state`, `sweep`, `series` and `verify`.
//!
//! Every output starts with a `# nlcs <subcommand> ...` line echoing the full
//! effective configuration. Diagnostics go to stderr.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::analysis::{self, beta_grid, moments_direct, reconcile_series, write_sweep_csv, PointStatus};
use crate::error::{Error, Result};
use crate::format::{fmt_exact, fmt_sig};
use crate::nonlinearity::NonlinearitySpec;
use crate::oracle;
use crate::states::{build_state, Family, TruncationPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nlcs", version, about = "Nonlinear coherent states: expansions, moment series and nonclassicality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Number-basis coefficients of one state as CSV.
    State(SingleArgs),
    /// Squeezing indicators and g2(0) over a grid of real amplitudes.
    Sweep(SweepArgs),
    /// Moment series I1..I5 and their reconciliation with direct moments.
    Series(SingleArgs),
    /// Truncated-matrix residual battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Displacement,
    Eigenstate,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Displacement => Family::Displacement,
            FamilyArg::Eigenstate => Family::Eigenstate,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// identity, trapped-ion, or table:<path>
    #[arg(long, default_value = "trapped-ion")]
    pub nonlinearity: String,
    /// Lamb-Dicke parameter (trapped-ion only)
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Displacement)]
    pub family: FamilyArg,
    /// Hard cap on the truncation order
    #[arg(long, default_value_t = 4096)]
    pub nmax: usize,
    #[arg(long, default_value_t = 1e-16)]
    pub tail_tol: f64,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub beta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 50)]
    pub beta_steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub beta: f64,
    /// Truncated Fock dimension of the operator matrices
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityChoice {
    Identity,
    TrappedIon,
    Table(PathBuf),
}

impl NonlinearityChoice {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(NonlinearityChoice::Identity),
            "trapped-ion" => Ok(NonlinearityChoice::TrappedIon),
            _ => match s.strip_prefix("table:") {
                Some(p) if !p.is_empty() => Ok(NonlinearityChoice::Table(PathBuf::from(p))),
                _ => Err(Error::InvalidArgument(format!(
                    "--nonlinearity must be identity, trapped-ion or table:<path>, got {s:?}"
                ))),
            },
        }
    }

    fn label(&self) -> String {
        match self {
            NonlinearityChoice::Identity => "identity".into(),
            NonlinearityChoice::TrappedIon => "trapped-ion".into(),
            NonlinearityChoice::Table(p) => format!("table:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitudes {
    Single(f64),
    Grid { min: f64, max: f64, steps: usize },
}

/// Validated, fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub nonlinearity: NonlinearityChoice,
    pub eta: f64,
    pub amplitudes: Amplitudes,
    pub family: Family,
    pub nmax: usize,
    pub tail_tol: f64,
    pub dim: Option<usize>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn from_common(subcommand: &'static str, c: &CommonArgs, amplitudes: Amplitudes, dim: Option<usize>) -> Result<Self> {
        let cfg = RunConfig {
            subcommand,
            nonlinearity: NonlinearityChoice::parse(&c.nonlinearity)?,
            eta: c.eta,
            amplitudes,
            family: c.family.into(),
            nmax: c.nmax,
            tail_tol: c.tail_tol,
            dim,
            output: c.output.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_command(cmd: &Command) -> Result<Self> {
        match cmd {
            Command::State(a) => Self::from_common("state", &a.common, Amplitudes::Single(a.beta), None),
            Command::Series(a) => Self::from_common("series", &a.common, Amplitudes::Single(a.beta), None),
            Command::Sweep(a) => Self::from_common(
                "sweep",
                &a.common,
                Amplitudes::Grid { min: a.beta_min, max: a.beta_max, steps: a.beta_steps },
                None,
            ),
            Command::Verify(a) => Self::from_common("verify", &a.common, Amplitudes::Single(a.beta), Some(a.dim)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !self.eta.is_finite() || self.eta < 0.0 {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if self.nmax < 8 {
            return bad(format!("nmax must be >= 8, got {}", self.nmax));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return bad(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol));
        }
        match self.amplitudes {
            Amplitudes::Single(b) if !b.is_finite() => return bad(format!("beta must be finite, got {b}")),
            Amplitudes::Grid { steps, .. } if steps < 1 => return bad("beta_steps must be >= 1".into()),
            Amplitudes::Grid { min, max, .. } if min.partial_cmp(&max).is_none_or(|o| o.is_gt()) => {
                return bad(format!("beta_min ({min}) must not exceed beta_max ({max})"))
            }
            _ => {}
        }
        if let Some(dim) = self.dim {
            if dim < 4 {
                return bad(format!("dim must be >= 4, got {dim}"));
            }
        }
        if let NonlinearityChoice::Table(p) = &self.nonlinearity {
            if !p.exists() {
                return bad(format!("table file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<NonlinearitySpec> {
        match &self.nonlinearity {
            NonlinearityChoice::Identity => Ok(NonlinearitySpec::identity()),
            NonlinearityChoice::TrappedIon => NonlinearitySpec::trapped_ion(self.eta),
            NonlinearityChoice::Table(p) => NonlinearitySpec::load_table(p),
        }
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy::default().with_n_hard(self.nmax).with_tail_tol(self.tail_tol)
    }

    /// `# nlcs <subcommand> key=value ...` with every effective setting.
    pub fn echo_line(&self) -> String {
        let g = fmt_exact;
        let mut s = format!("# nlcs {} eta={} nonlinearity={} family={}", self.subcommand, g(self.eta), self.nonlinearity.label(), self.family);
        match self.amplitudes {
            Amplitudes::Single(b) => write!(s, " beta={}", g(b)),
            Amplitudes::Grid { min, max, steps } => {
                write!(s, " beta_min={} beta_max={} beta_steps={}", g(min), g(max), steps)
            }
        }
        .expect("write to String");
        if let Some(dim) = self.dim {
            write!(s, " dim={dim}").expect("write to String");
        }
        write!(s, " nmax={} tail_tol={}", self.nmax, g(self.tail_tol)).expect("write to String");
        s
    }

    fn single_beta(&self) -> f64 {
        match self.amplitudes {
            Amplitudes::Single(b) => b,
            Amplitudes::Grid { min, .. } => min,
        }
    }
}

/// Why a run did not finish with exit status 0.
#[derive(Debug)]
pub enum RunFailure {
    Error(Error),
    Io(io::Error),
    /// Output was produced but a check failed.
    Check(String),
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        RunFailure::Error(e)
    }
}

impl From<io::Error> for RunFailure {
    fn from(e: io::Error) -> Self {
        RunFailure::Io(e)
    }
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunFailure::Check(_) => EXIT_CHECK_FAILED,
            _ => EXIT_ERROR,
        }
    }

    pub fn diagnostic(&self) -> String {
        match self {
            RunFailure::Error(e) => match e.offending_n() {
                Some(n) => format!("nlcs: error at n = {n}: {e}"),
                None => format!("nlcs: error: {e}"),
            },
            RunFailure::Io(e) => format!("nlcs: i/o error: {e}"),
            RunFailure::Check(m) => format!("nlcs: {m}"),
        }
    }
}

type RunResult = std::result::Result<(), RunFailure>;

pub fn run_state<W: Write>(cfg: &RunConfig, mut out: W) -> RunResult {
    let spec = cfg.spec()?;
    let state = build_state(cfg.family, &spec, Complex64::new(cfg.single_beta(), 0.0), &cfg.policy())?;
    writeln!(out, "{}", cfg.echo_line())?;
    state.write_csv(&mut out)?;
    Ok(())
}

pub fn run_sweep<W: Write>(cfg: &RunConfig, mut out: W) -> RunResult {
    let spec = cfg.spec()?;
    let Amplitudes::Grid { min, max, steps } = cfg.amplitudes else {
        return Err(Error::InvalidArgument("sweep needs a beta grid".into()).into());
    };
    let grid = beta_grid(min, max, steps)?;
    let records = analysis::sweep(cfg.family, &spec, &grid, &cfg.policy())?;
    writeln!(out, "{}", cfg.echo_line())?;
    write_sweep_csv(&records, spec.eta(), &mut out)?;
    if records.iter().all(|r| r.status() != PointStatus::Ok) {
        let first = records.iter().find_map(|r| r.outcome.as_ref().err()).cloned();
        return Err(match first {
            Some(e) => RunFailure::Error(e),
            None => RunFailure::Check("no grid point evaluated".into()),
        });
    }
    Ok(())
}

pub fn run_series<W: Write>(cfg: &RunConfig, mut out: W) -> RunResult {
    let spec = cfg.spec()?;
    let beta = cfg.single_beta();
    let policy = cfg.policy();
    let series = analysis::series_for_family(cfg.family, &spec, beta, &policy)?;
    let state = build_state(cfg.family, &spec, Complex64::new(beta, 0.0), &policy)?;
    let rec = reconcile_series(&series, &moments_direct(&state), beta);
    let g = |x: f64| fmt_sig(x, 15);
    writeln!(out, "{}", cfg.echo_line())?;
    for (name, v) in [("I1", series.i1), ("I2", series.i2), ("I3", series.i3), ("I4", series.i4), ("I5", series.i5)] {
        writeln!(out, "{name}={}", g(v))?;
    }
    writeln!(out, "terms_used={}", series.terms_used)?;
    writeln!(out, "identity,lhs_re,lhs_im,rhs,rel_residual,holds")?;
    for row in &rec.rows {
        let residual = row.residual.map(g).unwrap_or_else(|| "skipped".into());
        writeln!(out, "{},{},{},{},{},{}", row.label, g(row.lhs.re), g(row.lhs.im), g(row.rhs), residual, row.holds())?;
    }
    writeln!(out, "a4_reading={}", rec.a4_reading)?;
    Ok(())
}

pub fn run_verify<W: Write>(cfg: &RunConfig, mut out: W) -> RunResult {
    let spec = cfg.spec()?;
    let dim = cfg.dim.unwrap_or(32);
    let report = oracle::verify_battery(&spec, dim, Complex64::new(cfg.single_beta(), 0.0), &cfg.policy())?;
    writeln!(out, "{}", cfg.echo_line())?;
    for line in &report.lines {
        match line.limit {
            Some(limit) => writeln!(
                out,
                "{}={} limit={} {}",
                line.name,
                fmt_sig(line.value, 6),
                fmt_sig(limit, 3),
                if line.passed() { "pass" } else { "FAIL" }
            )?,
            None => writeln!(out, "{}={}", line.name, fmt_sig(line.value, 6))?,
        }
    }
    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.passed()).map(|l| l.name.as_str()).collect();
    writeln!(out, "status={}", if failed.is_empty() { "pass" } else { "fail" })?;
    if !failed.is_empty() {
        return Err(RunFailure::Check(format!("residual above threshold: {}", failed.join(", "))));
    }
    Ok(())
}

/// Runs a parsed command line, writing diagnostics to `err`; returns the exit status.
pub fn run<W: Write, E: Write>(cli: &Cli, stdout: W, mut err: E) -> i32 {
    let result = RunConfig::from_command(&cli.command).map_err(RunFailure::from).and_then(|cfg| {
        // Buffer so that failures before any output leave the target untouched.
        let mut buf = Vec::new();
        let r = match cli.command {
            Command::State(_) => run_state(&cfg, &mut buf),
            Command::Sweep(_) => run_sweep(&cfg, &mut buf),
            Command::Series(_) => run_series(&cfg, &mut buf),
            Command::Verify(_) => run_verify(&cfg, &mut buf),
        };
        if !buf.is_empty() {
            write_output(&cfg, &buf, stdout)?;
        }
        r
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{}", f.diagnostic());
            f.exit_code()
        }
    }
}

fn write_output<W: Write>(cfg: &RunConfig, bytes: &[u8], mut stdout: W) -> io::Result<()> {
    match &cfg.output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(bytes)?;
            f.flush()
        }
        None => {
            stdout.write_all(bytes)?;
            stdout.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nlcs").chain(args.iter().copied())).unwrap()
    }

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(&parse(args), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn echo_line_has_defaults() {
        let cfg = RunConfig::from_command(&parse(&["sweep"]).command).unwrap();
        assert_eq!(
            cfg.echo_line(),
            "# nlcs sweep eta=0.2 nonlinearity=trapped-ion family=displacement beta_min=0.02 beta_max=1 beta_steps=50 nmax=4096 tail_tol=1e-16"
        );
    }

    #[test]
    fn config_validation() {
        for args in [
            &["sweep", "--beta-min", "1", "--beta-max", "0.5"][..],
            &["sweep", "--beta-steps", "0"],
            &["state", "--eta", "-0.1"],
            &["state", "--nmax", "4"],
            &["state", "--nonlinearity", "table:/does/not/exist"],
            &["state", "--nonlinearity", "quartic"],
        ] {
            let (code, out, err) = run_args(args);
            assert_eq!(code, EXIT_ERROR, "{args:?}");
            assert!(out.is_empty());
            assert!(err.starts_with("nlcs: error"), "{err}");
        }
    }

    #[test]
    fn vacuum_state_output() {
        let (code, out, _) = run_args(&["state", "--nonlinearity", "identity", "--beta", "0"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# nlcs state eta=0.2 nonlinearity=identity"));
        assert_eq!(lines[2], "n,re_c,im_c,prob");
        assert_eq!(&lines[3..], &["0,1,0,1"]);
    }

    #[test]
    fn singular_state_exits_two() {
        let (code, out, err) = run_args(&["state", "--eta", "1"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(out.is_empty());
        assert!(err.contains("n = 1"), "{err}");
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn series_output() {
        let (code, out, _) = run_args(&["series", "--nonlinearity", "identity", "--beta", "0.7"]);
        assert_eq!(code, 0);
        assert!(out.contains("I3=0.49\n"), "{out}");
        assert!(out.contains("a4_reading=beta4_I4"));
        assert!(out.contains("A4_printed,"));
    }
}
