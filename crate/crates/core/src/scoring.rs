//! Per-video anomaly scores computed from manifest artifacts.
//!
//! * spatial: warping error of the normalized depth sequence under depth flow
//! * appearance: `1 − consistency` averaged over the CLIP and DINO streams
//! * motion: warping error of the RGB frames under frame flow

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{appearance_anomaly, ConsistencyConfig, ConsistencyError};
use crate::labels::{AnomalyScores, ScoredVideo};
use crate::tensor_io::{
    ArtifactKind, DepthSequence, EmbeddingSequence, FlowField, FrameSequence, ManifestError, SequenceError,
    VideoManifest,
};
use crate::warp::{warping_error, Perturbation, WarpError, WarpOptions};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("video {video_id}: missing artifact `{artifact}`")]
    MissingArtifact { video_id: String, artifact: ArtifactKind },
    #[error("videos lacking `{artifact}`: {}", video_ids.join(", "))]
    MissingInCohort { artifact: ArtifactKind, video_ids: Vec<String> },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("video {video_id}: {source}")]
    Sequence {
        video_id: String,
        #[source]
        source: SequenceError,
    },
    #[error("video {video_id}: {source}")]
    Warp {
        video_id: String,
        #[source]
        source: WarpError,
    },
    #[error("video {video_id}: {source}")]
    Consistency {
        video_id: String,
        #[source]
        source: ConsistencyError,
    },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub consistency: ConsistencyConfig,
    pub warp: WarpOptions,
}

fn require(v: &VideoManifest, kind: ArtifactKind) -> Result<crate::Tensor, ScoreError> {
    v.load(kind)?.ok_or_else(|| ScoreError::MissingArtifact { video_id: v.video_id.clone(), artifact: kind })
}

fn seq_err(v: &VideoManifest) -> impl FnOnce(SequenceError) -> ScoreError + '_ {
    move |source| ScoreError::Sequence { video_id: v.video_id.clone(), source }
}

fn warp_err(v: &VideoManifest) -> impl FnOnce(WarpError) -> ScoreError + '_ {
    move |source| ScoreError::Warp { video_id: v.video_id.clone(), source }
}

/// Motion anomaly: warping error on the RGB frames, optionally after a
/// frame perturbation.
pub fn motion_score_with(
    v: &VideoManifest,
    opts: WarpOptions,
    perturb: Option<&Perturbation>,
) -> Result<f64, ScoreError> {
    let frames = FrameSequence::new(require(v, ArtifactKind::Frames)?).map_err(seq_err(v))?;
    let flow = FlowField::new(require(v, ArtifactKind::FrameFlow)?).map_err(seq_err(v))?;
    let frames = match perturb {
        Some(p) => crate::warp::perturb_sequence(frames.tensor(), p).map_err(warp_err(v))?,
        None => frames.into_tensor(),
    };
    Ok(warping_error(&frames, flow.tensor(), opts).map_err(warp_err(v))?.total)
}

pub fn motion_anomaly_score(v: &VideoManifest) -> Result<f64, ScoreError> {
    motion_score_with(v, WarpOptions::default(), None)
}

fn spatial_score_with(v: &VideoManifest, opts: WarpOptions) -> Result<f64, ScoreError> {
    let depth = DepthSequence::from_raw(require(v, ArtifactKind::Depth)?).map_err(seq_err(v))?;
    let flow = FlowField::new(require(v, ArtifactKind::DepthFlow)?).map_err(seq_err(v))?;
    Ok(warping_error(depth.tensor(), flow.tensor(), opts).map_err(warp_err(v))?.total)
}

pub fn spatial_anomaly_score(v: &VideoManifest) -> Result<f64, ScoreError> {
    spatial_score_with(v, WarpOptions::default())
}

fn appearance_score_with(v: &VideoManifest, cfg: ConsistencyConfig) -> Result<f64, ScoreError> {
    let load = |kind| -> Result<Option<EmbeddingSequence>, ScoreError> {
        v.load(kind)?.map(|t| EmbeddingSequence::new(t).map_err(seq_err(v))).transpose()
    };
    let clip = load(ArtifactKind::ClipEmb)?;
    let dino = load(ArtifactKind::DinoEmb)?;
    if clip.is_none() && dino.is_none() {
        return Err(ScoreError::MissingArtifact { video_id: v.video_id.clone(), artifact: ArtifactKind::ClipEmb });
    }
    appearance_anomaly(clip.as_ref(), dino.as_ref(), cfg)
        .map(|s| s.anomaly)
        .map_err(|source| ScoreError::Consistency { video_id: v.video_id.clone(), source })
}

pub fn appearance_anomaly_score(v: &VideoManifest) -> Result<f64, ScoreError> {
    appearance_score_with(v, ConsistencyConfig::default())
}

pub fn score_video(v: &VideoManifest, cfg: &ScoringConfig) -> Result<AnomalyScores, ScoreError> {
    Ok(AnomalyScores {
        spatial: spatial_score_with(v, cfg.warp)?,
        appearance: appearance_score_with(v, cfg.consistency)?,
        motion: motion_score_with(v, cfg.warp, None)?,
    })
}

/// Artifacts each video must name before it can be scored.
const REQUIRED: [ArtifactKind; 4] =
    [ArtifactKind::Frames, ArtifactKind::FrameFlow, ArtifactKind::Depth, ArtifactKind::DepthFlow];

/// Lists, per artifact, the videos that lack it. Videos need frames, both
/// flows, depth and at least one embedding stream.
pub fn missing_artifacts(videos: &[VideoManifest]) -> BTreeMap<ArtifactKind, Vec<String>> {
    let mut out: BTreeMap<ArtifactKind, Vec<String>> = BTreeMap::new();
    for v in videos {
        for kind in REQUIRED {
            if !v.has(kind) {
                out.entry(kind).or_default().push(v.video_id.clone());
            }
        }
        if !v.has(ArtifactKind::ClipEmb) && !v.has(ArtifactKind::DinoEmb) {
            out.entry(ArtifactKind::ClipEmb).or_default().push(v.video_id.clone());
        }
    }
    out
}

/// Scores a whole cohort on `workers` threads (0 = rayon default). Results
/// keep the input order.
pub fn score_cohort(
    videos: &[VideoManifest],
    cfg: &ScoringConfig,
    workers: usize,
) -> Result<Vec<ScoredVideo>, ScoreError> {
    if let Some((artifact, video_ids)) = missing_artifacts(videos).into_iter().next() {
        return Err(ScoreError::MissingInCohort { artifact, video_ids });
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| ScoreError::Pool(e.to_string()))?;
    pool.install(|| {
        videos
            .par_iter()
            .map(|v| Ok(ScoredVideo { video_id: v.video_id.clone(), is_real: v.is_real, scores: score_video(v, cfg)? }))
            .collect()
    })
}
