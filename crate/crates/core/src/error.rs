use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular (pivot {pivot:e} at step {step})")]
    SingularMatrix { step: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    EigenNoConvergence { iterations: usize },

    #[error("matrix dimension {0} exceeds the eigenvalue routine limit")]
    TooLarge(usize),

    #[error("abscissae have zero variance")]
    DegenerateAbscissa,

    #[error("grid with {nt} points is too small for this operator (need at least {min})")]
    GridTooSmall { nt: usize, min: usize },

    #[error("invalid grid interval [{t1}, {t2}]")]
    InvalidInterval { t1: f64, t2: f64 },

    #[error("state layout mismatch: expected {expected} unknowns, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },

    #[error("missing parameter `{name}` for problem family {family}")]
    MissingParameter { family: &'static str, name: &'static str },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("KKT system is singular (pivot {pivot:e} at step {step})")]
    SingularKkt { step: usize, pivot: f64 },

    #[error("solver did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("need at least {needed} usable points for a fit, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("overdamped or critically damped oscillator is not supported")]
    OverdampedUnsupported,

    #[error("operation not supported for this problem family: {0}")]
    Unsupported(&'static str),

    #[error("solve failed at nt = {nt}: {source}")]
    Ladder {
        nt: usize,
        #[source]
        source: Box<Error>,
    },
}
