use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("format error in {record}: {message}")]
    Format { record: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trajectory diverged at t = {time} (|x| > {limit:e})")]
    Divergence { time: f64, limit: f64 },

    #[error("equilibrium search did not converge: {0}")]
    NonConvergence(String),

    #[error("system is not stable: max Re(eigenvalue) = {max_real:e}")]
    Unstable { max_real: f64 },

    #[error("operator is not diagonalizable (eigenvector condition number {condition:e})")]
    NonDiagonalizable { condition: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("result has non-negligible imaginary part (relative {residue:e})")]
    Symmetry { residue: f64 },

    #[error("infeasible band: {0}")]
    InfeasibleBand(String),

    #[error("Fourier transform diverges: mode {index} has Re(lambda) = {real:e} >= 0")]
    DivergentTransform { index: usize, real: f64 },

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("grid inconsistency: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            record: record.into(),
            message: message.into(),
        }
    }

    pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { expected, got })
        }
    }
}
