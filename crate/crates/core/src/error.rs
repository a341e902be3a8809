use thiserror::Error;

/// Errors raised by the modelling, estimation and reduction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("descriptor matrix E is singular or too ill-conditioned (condition estimate {condition:.3e})")]
    SingularE { condition: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("evaluation point z = {re} + {im}i is a pole of the model")]
    PoleHit { re: f64, im: f64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("least-squares regressor is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficientRegressor { rank: usize, cols: usize },

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("cross-correlation has no negative lags to set the threshold from")]
    InsufficientLags,

    #[error("no future-window length N keeps the input block-Hankel matrix full row rank")]
    NoValidN,

    #[error("input is not persistently exciting (rank {rank} < {rows} rows)")]
    NotPersistentlyExciting { rank: usize, rows: usize },

    #[error("saddle-point system U F^-1 U' is numerically singular (rcond {rcond:.3e}); try a larger noise-variance floor")]
    IllConditionedSaddle { rcond: f64 },

    #[error("input auto-spectrum vanishes at frequency bin {bin}")]
    SpectralDivision { bin: usize },

    #[error("interpolation points {i} and {j} coincide")]
    PointCollision { i: usize, j: usize },

    #[error("reduction order {r} outside [1, {max}]")]
    Order { r: usize, max: usize },

    #[error("reference has zero norm or zero variance")]
    DegenerateReference,

    #[error("invalid evaluation grid: {0}")]
    Grid(String),

    #[error("method {0} is not supported for this dataset")]
    MethodUnsupported(String),

    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: u64,
        column: u64,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            line: 0,
            column: 0,
            message: message.into(),
        }
    }

    /// Tags an error with the algorithm step that produced it.
    pub fn at_step(self, step: &'static str) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for malformed input (files, arguments, dimensions) as opposed to
    /// numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Dimension(_)
                | Error::OutOfRange(_)
                | Error::InvalidArgument(_)
                | Error::Grid(_)
                | Error::MethodUnsupported(_)
                | Error::Format { .. }
                | Error::Io(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format {
            line: e.line() as u64,
            column: e.column() as u64,
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
