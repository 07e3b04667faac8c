//! Nash-equilibrium power control for the Gaussian frequency-selective
//! interference channel.
//!
//! A set of `Q` non-cooperative links shares `N` frequency bins. Each link
//! maximizes its own information rate, treating the interference generated by
//! the others as additive colored noise, subject to an average power budget
//! and per-carrier spectral masks. The equilibria of this game are the fixed
//! points of per-user waterfilling, which this crate computes with four
//! families of distributed iterations (sequential/simultaneous waterfilling,
//! with optional smoothing memory, and sequential/simultaneous gradient
//! projection), and certifies with the matrix conditions that guarantee
//! global convergence.
//!
//! Module map:
//! - [`model`] — game instances (channel gains, SNR gaps, masks) and
//!   SINR/rate evaluation;
//! - [`projection`] — exact Euclidean/metric projections onto the capped
//!   simplex and the waterfilling best response;
//! - [`algorithms`] — the iterative equilibrium solvers and run traces;
//! - [`conditions`] — interference matrices, spectral radii, and the full
//!   battery of sufficient convergence conditions;
//! - [`analysis`] — variational-inequality residuals, convergence-exponent
//!   estimation and bounds, contraction probes;
//! - [`experiments`] — random scenario generation, Monte Carlo condition
//!   sweeps, and rate-versus-iteration trace experiments.

pub mod algorithms;
pub mod analysis;
pub mod conditions;
pub mod experiments;
pub mod model;
pub mod projection;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A feasibility requirement on a strategy set or mask is violated.
    #[error("infeasible: {0}")]
    Feasibility(String),
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A matrix argument fails a structural requirement (shape, symmetry,
    /// positive definiteness, nonnegativity).
    #[error("matrix error: {0}")]
    Matrix(String),
    /// An algorithm configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A statistical estimate cannot be formed from the available data.
    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
