use thiserror::Error;

/// Errors produced by the solver library and the experiment harness.
#[derive(Debug, Error)]
pub enum MoltError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("degenerate domain: mu = {mu} (alpha * (b - a) too small)")]
    DegenerateDomain { mu: f64 },

    #[error("amplification factor evaluated at its pole z = {0}")]
    Pole(f64),

    #[error("root bracketing failed: {0}")]
    RootBracketing(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last delta {residual:e})")]
    IterationFailure { iterations: usize, residual: f64 },

    #[error("dt = {dt}: {source}")]
    AtTimeStep {
        dt: f64,
        #[source]
        source: Box<MoltError>,
    },

    #[error("unsupported query: {0}")]
    Unsupported(String),

    #[error("interface lost: no sign change along the tracking slice")]
    InterfaceLost,

    #[error("spec file line {line}: {message}")]
    SpecParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MoltError>;

pub(crate) fn invalid(msg: impl Into<String>) -> MoltError {
    MoltError::InvalidArgument(msg.into())
}
