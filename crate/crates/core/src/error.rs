use thiserror::Error;

/// Errors raised by the recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Layer widths are not strictly increasing, or a layer is empty.
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A pre-activation sits closer to zero than the finite-difference step can tolerate.
    #[error(
        "smoothness guard violated at layer {layer}, unit {unit}: |pre-activation| = {value:e} < margin {margin:e}"
    )]
    SmoothnessGuardViolated {
        layer: usize,
        unit: usize,
        value: f64,
        margin: f64,
    },

    /// Descent cannot start from the origin.
    #[error("invalid start: the initial point must be nonzero")]
    InvalidStart,

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
