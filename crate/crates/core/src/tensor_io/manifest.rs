//! Per-video manifests binding a video's ingested artifacts together.
//!
//! A cohort directory holds one manifest per video under `manifests/`.
//! Artifact paths are resolved relative to the directory of the manifest
//! that names them.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format::{read_tensor, read_tensor_shape, TensorIoError};
use super::tensor::Tensor;
use crate::labels::ForgeryLabel;

pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("video {video_id}: required field `{field}` is missing")]
    MissingField { video_id: String, field: String },
    #[error("video {video_id}: artifact `{field}` at {path}: {source}")]
    DanglingPath {
        video_id: String,
        field: &'static str,
        path: PathBuf,
        #[source]
        source: TensorIoError,
    },
    #[error("duplicate video_id {video_id} ({first} and {second})")]
    DuplicateId { video_id: String, first: PathBuf, second: PathBuf },
    #[error("cohort directory {0} mixes cohort ids {1:?}")]
    MixedCohort(PathBuf, Vec<String>),
    #[error("cohort directory {0} contains no manifests")]
    EmptyCohort(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArtifactKind {
    Frames,
    Depth,
    FrameFlow,
    DepthFlow,
    ClipEmb,
    DinoEmb,
    Tokens,
    DepthFeat,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        Self::Frames,
        Self::Depth,
        Self::FrameFlow,
        Self::DepthFlow,
        Self::ClipEmb,
        Self::DinoEmb,
        Self::Tokens,
        Self::DepthFeat,
    ];

    /// JSON field name inside `artifacts`.
    pub fn field(self) -> &'static str {
        match self {
            Self::Frames => "frames",
            Self::Depth => "depth",
            Self::FrameFlow => "frame_flow",
            Self::DepthFlow => "depth_flow",
            Self::ClipEmb => "clip_emb",
            Self::DinoEmb => "dino_emb",
            Self::Tokens => "tokens",
            Self::DepthFeat => "depth_feat",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.field())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifacts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_flow: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_flow: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_emb: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dino_emb: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_feat: Option<PathBuf>,
}

impl Artifacts {
    pub fn get(&self, kind: ArtifactKind) -> Option<&PathBuf> {
        match kind {
            ArtifactKind::Frames => self.frames.as_ref(),
            ArtifactKind::Depth => self.depth.as_ref(),
            ArtifactKind::FrameFlow => self.frame_flow.as_ref(),
            ArtifactKind::DepthFlow => self.depth_flow.as_ref(),
            ArtifactKind::ClipEmb => self.clip_emb.as_ref(),
            ArtifactKind::DinoEmb => self.dino_emb.as_ref(),
            ArtifactKind::Tokens => self.tokens.as_ref(),
            ArtifactKind::DepthFeat => self.depth_feat.as_ref(),
        }
    }

    pub fn set(&mut self, kind: ArtifactKind, path: Option<PathBuf>) {
        let slot = match kind {
            ArtifactKind::Frames => &mut self.frames,
            ArtifactKind::Depth => &mut self.depth,
            ArtifactKind::FrameFlow => &mut self.frame_flow,
            ArtifactKind::DepthFlow => &mut self.depth_flow,
            ArtifactKind::ClipEmb => &mut self.clip_emb,
            ArtifactKind::DinoEmb => &mut self.dino_emb,
            ArtifactKind::Tokens => &mut self.tokens,
            ArtifactKind::DepthFeat => &mut self.depth_feat,
        };
        *slot = path;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoManifest {
    pub video_id: String,
    pub cohort_id: String,
    pub is_real: bool,
    pub artifacts: Artifacts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_label: Option<ForgeryLabel>,
    /// Directory that relative artifact paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl VideoManifest {
    pub fn artifact_path(&self, kind: ArtifactKind) -> Option<PathBuf> {
        self.artifacts.get(kind).map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn has(&self, kind: ArtifactKind) -> bool {
        self.artifacts.get(kind).is_some()
    }

    /// Loads one artifact tensor; `Ok(None)` when the manifest does not name it.
    pub fn load(&self, kind: ArtifactKind) -> Result<Option<Tensor>, ManifestError> {
        let Some(path) = self.artifact_path(kind) else {
            return Ok(None);
        };
        read_tensor(&path).map(Some).map_err(|source| ManifestError::DanglingPath {
            video_id: self.video_id.clone(),
            field: kind.field(),
            path,
            source,
        })
    }

    fn validate(&self) -> Result<(), ManifestError> {
        if self.video_id.is_empty() {
            return Err(ManifestError::MissingField { video_id: String::new(), field: "video_id".into() });
        }
        if !self.has(ArtifactKind::Frames) {
            return Err(ManifestError::MissingField {
                video_id: self.video_id.clone(),
                field: "artifacts.frames".into(),
            });
        }
        for kind in ArtifactKind::ALL {
            if let Some(path) = self.artifact_path(kind) {
                read_tensor_shape(&path).map_err(|source| ManifestError::DanglingPath {
                    video_id: self.video_id.clone(),
                    field: kind.field(),
                    path,
                    source,
                })?;
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<VideoManifest, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let mut m: VideoManifest = serde_json::from_str(&text)
        .map_err(|e| ManifestError::Schema { path: path.to_path_buf(), message: e.to_string() })?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    Ok(m)
}

pub fn save_manifest(m: &VideoManifest, path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

/// Loads every `manifests/*.json` under `dir`, sorted by `video_id`.
pub fn load_cohort(dir: impl AsRef<Path>) -> Result<Vec<VideoManifest>, ManifestError> {
    let dir = dir.as_ref();
    let mdir = dir.join(MANIFEST_DIR);
    let entries = fs::read_dir(&mdir).map_err(|source| ManifestError::Io { path: mdir.clone(), source })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ManifestError::Io { path: mdir.clone(), source })?;
        let p = entry.path();
        if p.extension().is_some_and(|e| e == "json") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut out: Vec<(VideoManifest, PathBuf)> = Vec::with_capacity(paths.len());
    for p in paths {
        out.push((load_manifest(&p)?, p));
    }
    if out.is_empty() {
        return Err(ManifestError::EmptyCohort(dir.to_path_buf()));
    }
    out.sort_by(|a, b| a.0.video_id.cmp(&b.0.video_id));
    for pair in out.windows(2) {
        if pair[0].0.video_id == pair[1].0.video_id {
            return Err(ManifestError::DuplicateId {
                video_id: pair[0].0.video_id.clone(),
                first: pair[0].1.clone(),
                second: pair[1].1.clone(),
            });
        }
    }
    let cohorts: BTreeSet<&str> = out.iter().map(|(m, _)| m.cohort_id.as_str()).collect();
    if cohorts.len() > 1 {
        return Err(ManifestError::MixedCohort(dir.to_path_buf(), cohorts.into_iter().map(String::from).collect()));
    }
    Ok(out.into_iter().map(|(m, _)| m).collect())
}
