//! Robust tube synthesis for uncertain affine and hybrid-affine systems.
//!
//! The crate is organised around a small zonotope algebra ([`zonoset`]),
//! order-reduction routines ([`reduction`]), plant model builders
//! ([`sysmodel`]), the convex/mixed-integer synthesis layer ([`synth`]),
//! the policy-choice runtime ([`policy`]) and simulation/benchmark
//! harnesses ([`simlab`]). Scenario files and artifact formats live in
//! [`config`] and [`io`].

pub mod config;
pub mod io;
pub mod policy;
pub mod reduction;
pub mod simlab;
mod sparse;
pub mod synth;
pub mod sysmodel;
pub mod zonoset;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible (dimensions or generator counts).
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A matrix that must be invertible is singular or too ill-conditioned.
    #[error("singular matrix: {0}")]
    Singular(String),
    /// The optimization problem was proven infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The solver failed for reasons other than infeasibility.
    #[error("solver failure: {0}")]
    Solver(String),
    /// A node or time budget ran out before optimality was proven.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    /// Scenario or artifact configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
