use std::path::PathBuf;

/// Errors raised by the analysis and optimization layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular element Jacobian (detJ = {det_j:e})")]
    SingularJacobian { det_j: f64 },

    #[error("inverted element {element}: det F = {det_f:e}")]
    InvertedElement { element: usize, det_f: f64 },

    #[error("incompressible material: Poisson ratio {nu} is not below 0.5")]
    Incompressible { nu: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration did not converge at increment {increment} (relative residual {residual:e} after {iterations} iterations)")]
    NonConvergence {
        increment: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("configuration error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("malformed VTK file: {0}")]
    Vtk(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
