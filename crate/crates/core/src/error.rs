use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid plant: {0}")]
    Plant(String),
    #[error("invalid exosystem: {0}")]
    Exosystem(String),
    #[error("kernel solve failed to converge after {iterations} iterations (last update {update:.3e})")]
    KernelSolve { iterations: usize, update: f64 },
    #[error("reciprocity solve failed on row {row} (last update {update:.3e})")]
    Reciprocity { row: usize, update: f64 },
    #[error(transparent)]
    Solvability(#[from] SolvabilityError),
    #[error("pole placement failed: {0}")]
    PolePlacement(String),
    #[error("observer design hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("spectral computation failed: {0}")]
    Spectral(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("simulation diverged at t = {time:.4}: {quantity} reached {value:.3e}")]
    Divergence {
        time: f64,
        quantity: String,
        value: f64,
    },
    #[error("decay fit: {0}")]
    Fit(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// Failures of the solvability conditions for the regulator (`m`) and observer (`n`) equations.
#[derive(Debug, Clone, Error)]
pub enum SolvabilityError {
    #[error(
        "regulator equations not uniquely solvable: |C_e F^-1[cosh(sqrt(i(lambda+c_s)) x)]| = {margin:.3e} for lambda = {lambda}"
    )]
    RegulatorMargin { lambda: Complex64, margin: f64 },
    #[error(
        "n-equation not solvable: lambda = {lambda} of S_d lies in the observer-error spectrum (|sinh| = {modulus:.3e})"
    )]
    ObserverSpectrumCollision { lambda: Complex64, modulus: f64 },
    #[error("n-equation has no solution at lambda = {lambda}: boundary compatibility violated by {mismatch:.3e}")]
    ObserverIncompatible { lambda: Complex64, mismatch: f64 },
    #[error("n-equation solution is not unique at lambda = {lambda} (lambda + c_o = 0)")]
    ObserverNotUnique { lambda: Complex64 },
}

impl Error {
    /// Exit status of the command-line driver: 2 invalid input, 3 unsolvable design,
    /// 4 divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Grid(_) | Error::Plant(_) | Error::Exosystem(_) | Error::Dimension(_) => 2,
            Error::Solvability(_) | Error::Hypothesis(_) | Error::PolePlacement(_) => 3,
            Error::Divergence { .. } => 4,
            _ => 1,
        }
    }
}
