//! Noise and dynamics of a detuned, mismatched, triply resonant optical
//! parametric oscillator (OPO) driven above threshold.
//!
//! The crate models the linearized quantum fluctuations of the three
//! intracavity fields around the bright steady state.  It provides
//!
//! * steady-state working point and oscillation threshold ([`model`]),
//! * the characteristic polynomial of the fluctuation dynamics and its
//!   resonances, including the boundary between damped and oscillatory
//!   relaxation ([`resonances`]),
//! * frequency-domain transfer functions from intracavity noise sources to
//!   the amplitude and phase quadratures of the emitted beams ([`transfer`]),
//! * single-beam and intensity-difference noise spectra ([`spectra`]),
//! * time-domain correlation functions, commutators and laser linewidth
//!   ([`correlations`]),
//! * the Gaussian two-mode machinery for the phase-difference state
//!   ([`gaussian`]),
//! * independent numerical cross-checks: a dense linear-system solver for
//!   the fluctuation equations and a stochastic integrator whose averaged
//!   periodogram reproduces the analytic spectra ([`oracle`]).
//!
//! Everything works in cavity-normalized units: frequencies are measured in
//! units of the mean signal/idler total decay rate and time in its inverse.

pub mod cli;
pub mod correlations;
pub mod gaussian;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod resonances;
pub mod spectra;
pub mod transfer;

pub use model::{NormalizedParams, OpoParams, SteadyState};

/// Crate-wide error type.
///
/// Variants map one-to-one onto the process exit codes of the `opo` binary:
/// configuration parse errors exit with 1, parameter validation errors with
/// 2, numerical failures with 3 and I/O errors with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed configuration input (unknown key, bad syntax, missing value).
    #[error("config error: {0}")]
    Config(String),
    /// Structurally valid input describing an unphysical or unsupported
    /// operating point.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure failed or left its domain of trust.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Filesystem failure while reading configs or writing results.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error kind.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Validation(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }

    /// Short machine-readable tag for this error kind.
    #[must_use]
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
