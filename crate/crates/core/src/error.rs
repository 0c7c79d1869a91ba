use thiserror::Error;

/// Errors produced by the simulator, the metrics and the trainer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("position {x} m is outside the {road} extent [0, {length}]")]
    OutOfRange { x: f64, road: &'static str, length: f64 },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("vehicle overlap detected at t = {time} s (vehicle {follower} behind {leader}, gap {gap} m)")]
    Collision { time: f64, follower: u32, leader: u32, gap: f64 },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
