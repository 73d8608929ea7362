use std::path::PathBuf;

/// Broad failure classes, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or inconsistent options.
    Usage,
    /// Malformed or inconsistent input data.
    Data,
    /// Singular solves, non-convergence, integrator failure.
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("duplicate delay {delay} in the {sum} sum")]
    DuplicateDelay { sum: &'static str, delay: f64 },

    #[error("invalid delay {delay} in the {sum} sum (delays must be finite and non-negative)")]
    InvalidDelay { sum: &'static str, delay: f64 },

    #[error("non-finite matrix entry in the {sum} sum at delay {delay}")]
    NonFiniteEntry { sum: &'static str, delay: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolvent jwI - A(jw) is singular at omega = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("integrand is not finite at omega = {omega}")]
    NonFiniteIntegrand { omega: f64 },

    #[error(
        "quadrature did not converge for {quantity}: error estimate {abs_error:.3e} after {evaluations} \
         evaluations on {panels} panels (the system may not be exponentially stable)"
    )]
    NonConvergence {
        quantity: &'static str,
        abs_error: f64,
        evaluations: usize,
        panels: usize,
    },

    #[error("H2 norm is ill-posed: the feedthrough (D) terms must all be zero")]
    NonzeroFeedthrough,

    #[error("gramian product is numerically rank deficient (rank {rank} of {n})")]
    RankDeficient { rank: usize, n: usize },

    #[error("balancing info does not belong to this system: {0}")]
    InfoMismatch(String),

    #[error("step size underflow at t = {t} (stiff or unstable system?)")]
    StepUnderflow { t: f64 },

    #[error("benchmark {id} ({collection}) needs its data file; supply {path}")]
    MissingBenchmarkData {
        id: String,
        collection: &'static str,
        path: PathBuf,
    },

    #[error("unknown benchmark id {0:?}")]
    UnknownBenchmark(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("system file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::UnknownBenchmark(_) => ErrorKind::Usage,
            Error::SingularResolvent { .. }
            | Error::NonFiniteIntegrand { .. }
            | Error::NonConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::StepUnderflow { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
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
