//! Error type shared by every solver stage.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RteError>;

#[derive(Debug, Error)]
pub enum RteError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file line {line}: {message}")]
    MeshParse { line: usize, message: String },

    /// A local 3x3 system could not be solved reliably.
    #[error("unstable local system on element {element} (direction {direction:?}, layer {layer:?}): {detail}")]
    Stability { element: usize, direction: Option<usize>, layer: Option<usize>, detail: String },

    #[error("sweep dependency cycle among {} elements: {elements:?}", elements.len())]
    Cycle { elements: Vec<usize> },

    #[error("source iteration did not converge after {iterations} iterations (last residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { iterations: usize, residual_history: Vec<f64> },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<RteError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RteError {
    /// Stable numeric code, used as the process exit status by the CLI.
    pub fn code(&self) -> i32 {
        match self {
            RteError::InvalidArgument(_) | RteError::IndexOutOfRange(_) => 2,
            RteError::InvalidMesh(_) | RteError::MeshParse { .. } => 3,
            RteError::Stability { .. } => 4,
            RteError::Cycle { .. } => 5,
            RteError::NonConvergence { .. } => 6,
            RteError::AssumptionViolation(_) => 7,
            RteError::AtLevel { source, .. } => source.code(),
            RteError::Io(_) => 8,
        }
    }

    /// Short machine-readable name matching [`RteError::code`].
    pub fn kind(&self) -> &'static str {
        match self {
            RteError::InvalidArgument(_) => "invalid-argument",
            RteError::IndexOutOfRange(_) => "index-out-of-range",
            RteError::InvalidMesh(_) => "invalid-mesh",
            RteError::MeshParse { .. } => "mesh-parse",
            RteError::Stability { .. } => "stability",
            RteError::Cycle { .. } => "cycle",
            RteError::NonConvergence { .. } => "non-convergence",
            RteError::AssumptionViolation(_) => "assumption-violation",
            RteError::AtLevel { source, .. } => source.kind(),
            RteError::Io(_) => "io",
        }
    }
}
