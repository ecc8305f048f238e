//! Cohort ranking, pseudo-label assignment, rank-based confidence weights and
//! the train / validation split with its human-review hold.

mod confidence;
mod rank;
mod split;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use confidence::{confidence_weight, Confidence, ConfidenceOrientation};
pub use rank::{assign_labels, label_cohort, rank_cohort, within_class_ranks, RankTable, Ranks, ScoredVideo};
pub use split::{pending_count, review_candidates, split_cohort, SplitManifest};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("cohort has no fake videos to rank")]
    EmptyCohort,
    #[error("video {video_id}: {kind} score is not finite ({value})")]
    NonFiniteScore { video_id: String, kind: ForgeryLabel, value: f64 },
    #[error("video {0} has no score")]
    MissingScore(String),
    #[error("rank {rank} outside 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("video {0} is in the cohort but carries no label")]
    Unlabeled(String),
    #[error("video {0} appears more than once")]
    DuplicateVideo(String),
    #[error("invalid label code {0}, expected 0..=3")]
    InvalidCode(u8),
}

/// Forgery class. The integer codes are part of every on-disk format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum ForgeryLabel {
    Spatial = 0,
    Appearance = 1,
    Motion = 2,
    Real = 3,
}

impl ForgeryLabel {
    pub const ALL: [ForgeryLabel; 4] = [Self::Spatial, Self::Appearance, Self::Motion, Self::Real];
    /// The anomaly classes, in tie-break priority order.
    pub const ANOMALIES: [ForgeryLabel; 3] = [Self::Spatial, Self::Appearance, Self::Motion];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Result<Self, LabelError> {
        match code {
            0 => Ok(Self::Spatial),
            1 => Ok(Self::Appearance),
            2 => Ok(Self::Motion),
            3 => Ok(Self::Real),
            other => Err(LabelError::InvalidCode(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Spatial => "spatial",
            Self::Appearance => "appearance",
            Self::Motion => "motion",
            Self::Real => "real",
        }
    }

    pub fn is_fake(self) -> bool {
        self != Self::Real
    }
}

impl TryFrom<u8> for ForgeryLabel {
    type Error = LabelError;
    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Self::from_code(code)
    }
}

impl From<ForgeryLabel> for u8 {
    fn from(l: ForgeryLabel) -> u8 {
        l.code()
    }
}

impl fmt::Display for ForgeryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anomaly scores of one video; higher is more anomalous for all three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScores {
    pub spatial: f64,
    pub appearance: f64,
    pub motion: f64,
}

impl AnomalyScores {
    pub fn get(&self, kind: ForgeryLabel) -> Option<f64> {
        match kind {
            ForgeryLabel::Spatial => Some(self.spatial),
            ForgeryLabel::Appearance => Some(self.appearance),
            ForgeryLabel::Motion => Some(self.motion),
            ForgeryLabel::Real => None,
        }
    }
}

/// Outcome of human review for one video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    #[default]
    Auto,
    Accepted,
    Reassigned(ForgeryLabel),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVideo {
    pub video_id: String,
    pub is_real: bool,
    pub scores: AnomalyScores,
    /// Cohort ranks; absent for real videos.
    pub ranks: Option<Ranks>,
    pub label: ForgeryLabel,
    /// Rank inside the assigned class (1 = most anomalous); absent for real videos.
    pub within_class_rank: Option<u32>,
    pub class_size: Option<u32>,
    pub normalized_rank: Option<f64>,
    /// Loss weight α.
    pub confidence: f64,
    #[serde(default)]
    pub review_state: ReviewStatus,
}

impl LabeledVideo {
    /// Label after applying the review verdict.
    pub fn final_label(&self) -> ForgeryLabel {
        match self.review_state {
            ReviewStatus::Reassigned(l) => l,
            _ => self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCohort {
    pub cohort_id: String,
    pub orientation: ConfidenceOrientation,
    pub videos: Vec<LabeledVideo>,
}

impl LabeledCohort {
    pub fn get(&self, video_id: &str) -> Option<&LabeledVideo> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// Fails on the first id in `video_ids` that carries no label.
    pub fn ensure_covers<'a>(&self, video_ids: impl IntoIterator<Item = &'a str>) -> Result<(), LabelError> {
        let known: std::collections::BTreeSet<&str> = self.videos.iter().map(|v| v.video_id.as_str()).collect();
        for id in video_ids {
            if !known.contains(id) {
                return Err(LabelError::Unlabeled(id.to_string()));
            }
        }
        Ok(())
    }
}
