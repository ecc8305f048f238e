use std::path::PathBuf;

use forgescore_core::labels::LabelError;
use forgescore_core::tensor_io::{ManifestError, TensorIoError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown video {0}")]
    UnknownVideo(String),
    #[error("video {0} is not awaiting review")]
    NotCandidate(String),
    #[error("invalid verdict: {0}")]
    InvalidVerdict(String),
    #[error("invalid class `{0}`: expected 0, 1 or 2")]
    BadClass(String),
    #[error("no split has been prepared for review")]
    NoSession,
    #[error("{0} videos still await review; finalize with force=true to override")]
    PendingRemain(usize),
    #[error("video {video_id} has no frame {frame}")]
    MissingFrame { video_id: String, frame: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    CorruptJournal { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
}

impl ReviewError {
    pub fn status(&self) -> u16 {
        match self {
            Self::UnknownVideo(_) | Self::MissingFrame { .. } => 404,
            Self::NotCandidate(_) | Self::NoSession | Self::PendingRemain(_) => 409,
            Self::InvalidVerdict(_) => 422,
            Self::BadClass(_) => 400,
            _ => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownVideo(_) => "unknown_video",
            Self::NotCandidate(_) => "not_pending",
            Self::InvalidVerdict(_) => "invalid_verdict",
            Self::BadClass(_) => "bad_class",
            Self::NoSession => "no_split",
            Self::PendingRemain(_) => "pending_remain",
            Self::MissingFrame { .. } => "missing_frame",
            Self::Io { .. } => "io",
            Self::CorruptJournal { .. } => "corrupt_journal",
            Self::Label(_) => "label",
            Self::Manifest(_) => "manifest",
            Self::TensorIo(_) => "tensor_io",
        }
    }
}
