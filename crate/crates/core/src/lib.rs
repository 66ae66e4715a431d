//! Transverse homoclinic orbits of periodic solutions of scalar delay
//! differential equations (DDEs), computed with a Chebyshev spectral method
//! of steps.
//!
//! The pipeline, end to end:
//!
//! 1. [`stepper`] — the time-`tau` map of a DDE with polynomial right-hand
//!    side, acting on Chebyshev coefficient sequences of history segments.
//! 2. [`periodic`] — periodic orbits as fixed points of the `m`-fold map,
//!    found by Newton on a multiple-shooting zero-finding problem in which
//!    the delay itself is an unknown.
//! 3. [`floquet`] — Floquet multipliers and eigenvector chains of the orbit,
//!    from cyclic products of per-step linearizations.
//! 4. [`manifold`] — a Taylor-in-`sigma`, Chebyshev-in-`t` parameterization
//!    of the unstable manifold, solved order by order through a linear
//!    recurrence, plus numerical growth of its boundary until it returns
//!    near the orbit.
//! 5. [`homoclinic`] — a boundary-value problem coupling the
//!    parameterization, a finite chain of map iterates, and a linear graph
//!    over the stable eigenspace; a zero found by Newton is a homoclinic
//!    connection, and invertibility of the Jacobian (condition number
//!    reported, never asserted as proof) indicates transversality.
//!
//! Supporting modules: [`chebseq`] (one-sided Chebyshev sequence algebra),
//! [`taylorcheb`] (Taylor series with Chebyshev-sequence coefficients),
//! [`models`] (polynomial DDE right-hand sides, including the cubic Ikeda
//! equation and a polynomial embedding of the Mackey–Glass equation),
//! [`linalg`] (dense LU / eigen / least-squares kernels), and [`artifact`]
//! (serialization of pipeline results).

pub mod artifact;
pub mod chebseq;
pub mod floquet;
pub mod guide;
pub mod homoclinic;
pub mod linalg;
pub mod manifold;
pub mod models;
pub mod periodic;
pub mod stepper;
pub mod taylorcheb;

use thiserror::Error;

/// Errors surfaced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A LAPACK routine reported failure (`info != 0`).
    #[error("{routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    /// A factorization hit an exactly singular pivot.
    #[error("singular matrix in {context} (pivot {pivot})")]
    SingularMatrix { context: &'static str, pivot: usize },

    /// An iteration exhausted its budget without meeting its tolerance.
    #[error("{context}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Operands with incompatible shapes or truncation orders.
    #[error("dimension mismatch in {context}: {detail}")]
    DimensionMismatch { context: &'static str, detail: String },

    /// The Mackey–Glass lift was evaluated at a state at or below the
    /// positivity floor, where the fractional powers are meaningless.
    #[error("positivity violation: component value {value:.3e} is below the floor {floor:.3e}")]
    PositivityViolation { value: f64, floor: f64 },

    /// A recurrence solve hit a (near-)resonant linear system.
    #[error("near-resonance at Taylor index {alpha:?}: {detail}")]
    Resonance { alpha: Vec<usize>, detail: String },

    /// Boundary growth finished its horizon without an approach below tolerance.
    #[error("no return detected within {steps} iterates (closest approach {closest:.3e})")]
    NoReturn { steps: usize, closest: f64 },

    /// Invalid configuration or input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
