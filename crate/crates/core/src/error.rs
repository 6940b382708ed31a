use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown UAV `{0}`")]
    UnknownUav(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("invalid interval [{lo},{hi}]")]
    InvalidInterval { lo: i64, hi: i64 },
    #[error("formula references UAV {uav} but the fleet has {fleet} UAVs")]
    UavOutOfRange { uav: usize, fleet: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("length tuple {tuple:?} lies outside the promising-length box")]
    OutsideBox { tuple: Vec<usize> },
    #[error("invalid fairness parameters: {0}")]
    Fairness(String),
    #[error("input {value} on axis {axis} exceeds bound {bound}")]
    InputOutOfBounds { axis: usize, value: f64, bound: f64 },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
