use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) is outside a {width}x{height} image")]
    OutOfBounds {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("vector is not unit length (norm {norm})")]
    NonUnit { norm: f64 },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("degenerate geometry at pixel ({x}, {y}): |v.n| = {incidence:e} below grazing threshold")]
    DegenerateGeometry { x: f64, y: f64, incidence: f64 },
    #[error("warp produced no valid source points")]
    EmptyWarp,
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("too few usable pixels: {found} (need at least {required})")]
    InsufficientPixels { found: usize, required: usize },
    #[error("ill-conditioned system (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("map has zero mean luminance; cannot normalize")]
    ZeroMean,
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("empty image")]
    EmptyImage,
    #[error("malformed {format} file: {reason}")]
    Format { format: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry { .. }
                | Error::IllConditioned { .. }
                | Error::EmptyWarp
                | Error::ZeroMean
                | Error::InsufficientPixels { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
