use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 4],
        right: [usize; 4],
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward already ran on this tape; record a new forward pass first")]
    BackwardAlreadyRun,

    #[error("non-finite loss at iteration {iteration}: {value}")]
    NonFiniteLoss { iteration: usize, value: f64 },

    #[error("degenerate intensity: variance {0:e} below epsilon")]
    DegenerateIntensity(f64),

    #[error("degenerate reference band {band}: mean is zero")]
    DegenerateReferenceBand { band: usize },

    #[error("smoothed PAN has value {value:e} below epsilon at pixel {pixel}")]
    DivisionGuard { pixel: usize, value: f64 },

    #[error("{}: not a raster file", path.display())]
    BadMagic { path: PathBuf },

    #[error("{}: unexpected end of raster data (expected {expected} bytes, found {found})", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: dtype mismatch (expected code {expected}, found {found})", path.display())]
    DtypeMismatch { path: PathBuf, expected: u8, found: u8 },

    #[error("{}: unsupported raster version {version}", path.display())]
    UnsupportedVersion { path: PathBuf, version: u16 },

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors caused by input data rather than by misuse of the API.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_))
    }
}
