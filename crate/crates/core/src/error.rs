use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Each variant corresponds to one failure class so that callers (the CLI in
/// particular) can map them onto distinct exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("coefficient table invalid: {0}")]
    Validation(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot standardize trait {trait_name}: zero variance")]
    ZeroVariance { trait_name: &'static str },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("non-finite gradient at weight {index}")]
    NonFiniteGradient { index: usize },
    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("architecture error: {0}")]
    Architecture(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("projection error: {0}")]
    Projection(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("separation error: {0}")]
    Separation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training failed for hidden size {hidden} (seed {seed}): {source}")]
    SweepRun {
        hidden: usize,
        seed: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("benchmark run {run} failed: {source}")]
    BenchmarkRun {
        run: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    /// True for failures caused by numerical breakdown (NaN, divergence)
    /// rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::NonFiniteGradient { .. } | Error::NanLoss { .. } => true,
            Error::SweepRun { source, .. } | Error::BenchmarkRun { source, .. } => {
                source.is_numeric()
            }
            _ => false,
        }
    }
}
