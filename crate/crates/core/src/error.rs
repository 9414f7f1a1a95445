use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mixed embedding row collapsed to (numerically) zero.
    #[error("degenerate row {row}: mixed vector has near-zero norm {norm:e}")]
    DegenerateRow { row: usize, norm: f64 },

    /// A hidden state too close to zero to define a direction.
    #[error("degenerate hidden state: norm {norm:e} <= 1e-12")]
    DegenerateHiddenState { norm: f64 },

    /// Operation requires a bit-packed (hypercube) index.
    #[error("unsupported index: {0}")]
    UnsupportedIndex(String),

    #[error("parse error at {location}: {msg}")]
    Parse { location: String, msg: String },

    #[error("generation failed: {0}")]
    GenerationFailed(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e} vs initial {initial:e}")]
    TrainingDiverged { epoch: usize, loss: f64, initial: f64 },

    #[error("loss became NaN at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
