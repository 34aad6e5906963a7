use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("simultaneous grid charge ({charge}) and discharge ({discharge})")]
    TradeContract { charge: f64, discharge: f64 },

    #[error("WET demand {q_min} cannot be met: at most {available} is harvestable")]
    InfeasibleWet { q_min: f64, available: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("input error at `{path}`: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
