use std::io;
use std::path::PathBuf;

use kerbside_core::annotation::AnnotationError;
use kerbside_core::eval::EvalError;
use kerbside_core::frame::FrameError;
use kerbside_core::geo::GeoError;
use kerbside_core::image::ImageError;
use kerbside_core::knn::KnnError;
use kerbside_core::predictions::PredictionError;
use kerbside_core::segment::SegmentError;
use kerbside_core::stats::StatsError;
use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: column {column}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        reason: String,
    },
    #[error("{count} rows have no GPS fix (first at line {first_line})")]
    MissingGpsFix { count: usize, first_line: u64 },
    #[error("image for frame {0:?} is missing or unreadable")]
    MissingImage(String),
    #[error("unsupported image format: {0}")]
    ImageFormat(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, column: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column: column.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::MissingGpsFix { .. } => "missing_gps_fix",
            Error::MissingImage(_) => "missing_image",
            Error::ImageFormat(_) => "image_format",
            Error::Config(_) => "config",
            Error::Frame(FrameError::DuplicateFrameId(_)) => "duplicate_frame_id",
            Error::Frame(_) => "frame",
            Error::Geo(_) => "overlapping_regions",
            Error::Stats(_) => "stats",
            Error::Image(_) => "image",
            Error::Knn(_) => "classifier",
            Error::Eval(_) => "eval",
            Error::Segment(_) => "segment",
            Error::Prediction(PredictionError::UnknownFrameId(_)) => "unknown_frame_id",
            Error::Prediction(PredictionError::DuplicatePrediction(_)) => "duplicate_prediction",
            Error::Prediction(_) => "prediction",
            Error::Annotation(_) => "annotation",
            Error::Json(_) => "json",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Body {
            error: self.code(),
            message: self.to_string(),
        })
        .expect("plain strings serialise")
    }
}
