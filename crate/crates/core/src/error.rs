use std::path::PathBuf;

use nalgebra::DVector;
use thiserror::Error;

/// Errors surfaced by graph construction, spectral analysis, the solvers and
/// the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("graph is disconnected ({} components: {components:?})", components.len())]
    Disconnected {
        /// 1-based vertex labels grouped by connected component.
        components: Vec<Vec<usize>>,
    },

    #[error("failed to generate a connected graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("degenerate spectrum: lambda2 = lambdaN = {0}, Chebyshev constants undefined")]
    DegenerateSpectrum(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "step sizes infeasible: need 1/alpha - L_f > 0, beta > 0 and \
         (1/(beta+rho))*(1/alpha - L_f) >= lambda_eff; got 1/alpha - L_f = {margin:.6e}, beta = {beta:.6e}, \
         (1/(beta+rho))*(1/alpha - L_f) = {lhs:.6e}, lambda_eff = {lambda_eff:.6e} \
         (alpha = {alpha}, rho = {rho}, L_f = {lipschitz})",
        margin = 1.0 / *.alpha - *.lipschitz
    )]
    StepSizeInfeasible {
        alpha: f64,
        beta: f64,
        rho: f64,
        lipschitz: f64,
        lambda_eff: f64,
        lhs: f64,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
