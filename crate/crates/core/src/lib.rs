//! Nonlinear coherent states of f-deformed oscillators.
//!
//! Two state families are built from a nonlinearity `f(n)`:
//! eigenstates of the deformed annihilation operator `A = a f(N)`, and
//! displacement-type states `exp(β A† - β* B)|0>` where `B = a f(N)⁻¹`
//! is the operator conjugate to `A` (`[A, B†] = [B, A†] = 1`).
//!
//! * [`specfun`]: Laguerre polynomials and log-factorials.
//! * [`nonlinearity`]: `f(n)` (identity, trapped ion, table) and `f(n)!`.
//! * [`states`]: normalized number-basis expansions with certified truncation.
//! * [`analysis`]: moment series, direct moments, squeezing and `g2(0)`.
//! * [`oracle`]: dense truncated-Fock matrices used as ground truth.
//! * [`cli`]: the `nlcs` command-line front end.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod format;
pub mod nonlinearity;
pub mod oracle;
pub mod specfun;
pub mod states;

pub use error::{Error, Result};
pub use nonlinearity::{NonlinearitySpec, SignedLogValue};
pub use states::{Family, StateExpansion, TruncationPolicy};
