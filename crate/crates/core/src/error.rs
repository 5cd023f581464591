use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model, layer, or run configuration that cannot be built.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A caller broke an operation's precondition (empty batch, stale cache, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training produced a non-finite loss, gradient, or parameter.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("point {index} ({x}, {y}) lies outside the unit square")]
    PointOutOfRange { index: usize, x: f64, y: f64 },

    #[error("command {command} is not accepted in mode {mode}")]
    InvalidTransition {
        command: &'static str,
        mode: &'static str,
    },

    #[error("decode error: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Short machine-readable category, used in error frames.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape { .. } => "shape",
            Error::Contract(_) => "contract",
            Error::Numerical(_) => "numerical",
            Error::PointOutOfRange { .. } => "point_out_of_range",
            Error::InvalidTransition { .. } => "invalid_transition",
            Error::Decode(_) => "decode",
        }
    }
}
