use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    Dimension {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("payload length mismatch: expected {expected} bits, got {got}")]
    PayloadLength { expected: usize, got: usize },

    #[error("pilot-only estimation impossible: the pilot set is empty")]
    EmptyPilotSet,

    #[error("reciprocal filtering undefined: |x| = {magnitude:e} at cell ({subcarrier}, {symbol})")]
    VanishingSymbol {
        subcarrier: usize,
        symbol: usize,
        magnitude: f64,
    },

    #[error("CFAR window {window:?} does not fit a {rows}x{cols} image")]
    CfarWindow {
        window: (usize, usize),
        rows: usize,
        cols: usize,
    },

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
