use thiserror::Error;

/// Errors raised by the engine. The variants map one-to-one onto the CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed network or input document; `pointer` is a JSON pointer into it.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("input has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },

    #[error("input entry {0} is not finite")]
    NonFinite(usize),

    #[error("layer {layer}: {message}")]
    Unsupported { layer: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error("model {0} has no surviving mass at the input layer")]
    NoSurvival(char),

    #[error("enumeration would exceed {limit} trajectories")]
    Guard { limit: usize },

    #[error("pre-activation {z:e} at layer {layer}, unit {unit} is within the finite-difference guard band")]
    Boundary { layer: usize, unit: usize, z: f64 },

    #[error("layer {layer} has {width} units, over the permutation search limit of {limit}")]
    WidthLimit { layer: usize, width: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { pointer: pointer.into(), message: message.into() }
    }

    pub(crate) fn unsupported(layer: usize, message: impl Into<String>) -> Self {
        Error::Unsupported { layer, message: message.into() }
    }
}
