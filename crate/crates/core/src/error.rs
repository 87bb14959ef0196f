use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state has dimension {state} but covariance is {rows}x{cols}")]
    DimensionMismatch {
        state: usize,
        rows: usize,
        cols: usize,
    },

    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("state must hold at least a 2-D position, got dimension {0}")]
    MissingPosition(usize),

    #[error("track {track} references unknown sensor {sensor}")]
    UnknownSensor { track: usize, sensor: u32 },

    #[error("sensor {0} has a non-positive range")]
    InvalidRange(u32),

    #[error("estimated-constant detection model needs frame statistics")]
    MissingContext,

    #[error("distance-based detection model needs a range for sensor {0}")]
    MissingSensorRange(u32),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{n} tracks exceeds the brute-force cap of {cap}")]
    TooManyTracks { n: usize, cap: usize },

    #[error("cholesky factorisation failed after covariance jitter")]
    Cholesky,

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
