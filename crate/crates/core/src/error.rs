use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode {0}; expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index ({i}, {j}, {k}) out of range for dims {dims:?}")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        dims: [usize; 3],
    },

    #[error("duplicate index ({i}, {j}, {k})")]
    DuplicateIndex { i: usize, j: usize, k: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric positive definite (eigenvalues in [{min_eig:e}, {max_eig:e}])")]
    NotSpd { min_eig: f64, max_eig: f64 },

    #[error("degenerate core: G_{mode} G_{mode}^T has eigenvalue ratio {ratio:e}")]
    DegenerateCore { mode: usize, ratio: f64 },

    #[error("rank-deficient matrix (Gram eigenvalues in [{min_eig:e}, {max_eig:e}])")]
    RankDeficient { min_eig: f64, max_eig: f64 },

    #[error("matrix is not orthogonal (deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("coupled Lyapunov solve did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("search direction is degenerate on the observed entries")]
    DegenerateDirection,

    #[error("no {0} set present")]
    MissingSet(&'static str),

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown benchmark case {0:?}")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
