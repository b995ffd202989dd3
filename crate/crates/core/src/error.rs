use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {field}: {reason}")]
    Geometry { field: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("source grid undersamples the slit: {samples:.1} samples per slit width, need at least {required}")]
    UndersampledSlit { samples: f64, required: usize },

    #[error("field grid [{lo:e}, {hi:e}] m does not cover the slit pair [{need_lo:e}, {need_hi:e}] m")]
    SlitsNotCovered {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("Fresnel quadrature aliasing: source pitch {pitch:e} m exceeds {limit:e} m")]
    Aliasing { pitch: f64, limit: f64 },

    #[error("detector grid extends to |x| = {max_x:e} m, outside the paraxial window for z = {distance:e} m")]
    NonParaxial { max_x: f64, distance: f64 },

    #[error("vector of length {found} does not match grid of {expected} points")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid scan: {0}")]
    Scan(String),

    #[error("scan position {x:e} m lies outside the detector grid [{lo:e}, {hi:e}] m")]
    ScanOutOfGrid { x: f64, lo: f64, hi: f64 },

    #[error("incompatible accumulators: {0}")]
    Incompatible(String),

    #[error("at least {required} frames are required, got {found}")]
    InsufficientFrames { required: u64, found: u64 },

    #[error("invalid intensity {value} in frame {frame}, channel {channel}, index {index}")]
    InvalidIntensity {
        frame: u64,
        channel: usize,
        index: usize,
        value: f64,
    },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    ConfigValue { field: String, message: String },

    #[error("frame stack: {0}")]
    Format(String),

    #[error("frame stack truncated: header declares {expected} frames, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("curves file: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Geometry { .. }
            | Error::Grid(_)
            | Error::UndersampledSlit { .. }
            | Error::SlitsNotCovered { .. }
            | Error::Aliasing { .. }
            | Error::NonParaxial { .. }
            | Error::Scan(_)
            | Error::ScanOutOfGrid { .. }
            | Error::ConfigSyntax { .. }
            | Error::ConfigValue { .. } => ErrorKind::Config,
            Error::Format(_)
            | Error::Truncated { .. }
            | Error::Csv(_)
            | Error::InvalidIntensity { .. }
            | Error::Io(_) => ErrorKind::Io,
            Error::LengthMismatch { .. }
            | Error::Incompatible(_)
            | Error::InsufficientFrames { .. }
            | Error::Analysis(_) => ErrorKind::Numerical,
        }
    }
}
