use thiserror::Error;

/// Crate-wide error type. Validation problems map to CLI exit code 2,
/// numerical problems (collapse, non-finite values) to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        layer: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(
        "representation collapse: teacher output entropy {entropy:.6} stayed below \
         threshold {threshold:.6} for a full epoch (epoch {epoch})"
    )]
    Collapse {
        entropy: f64,
        threshold: f64,
        epoch: usize,
    },

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("route lost: vehicle {distance:.2} m from route, recovery limit {limit:.2} m")]
    RouteLost { distance: f64, limit: f64 },

    #[error("corrupt {what}: {detail}")]
    Corrupt { what: String, detail: String },

    #[error("output directory locked by another run: {0}")]
    Locked(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Msg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn msg(s: impl Into<String>) -> Self {
        Error::Msg(s.into())
    }

    /// True for failures of numerical health rather than of input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Collapse { .. } | Error::NonFinite { .. })
    }
}
