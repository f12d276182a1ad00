use thiserror::Error;

/// Everything that can go wrong while evaluating or simulating a modulated field.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate point: {0}")]
    DegeneratePoint(&'static str),

    #[error("singular basis matrix (|det E| = {det:e})")]
    SingularBasis { det: f64 },

    #[error("point lies inside the hard core of obstacle {obstacle} (gamma = {gamma})")]
    Interior { obstacle: usize, gamma: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{0}")]
    Unsupported(String),

    /// Field evaluation failed inside an RK4 stage (1-based).
    #[error("rk4 stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Scenario { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Strips any RK4 stage wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short machine-readable tag used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegeneratePoint(_) => "degenerate_point",
            Error::SingularBasis { .. } => "singular_basis",
            Error::Interior { .. } => "interior",
            Error::Dimension { .. } => "dimension",
            Error::Unsupported(_) => "unsupported",
            Error::Stage { source, .. } => source.kind(),
            Error::Scenario { .. } => "scenario",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
