use std::collections::BTreeMap;

use forgescore_core::labels::{review_candidates, split_cohort, LabeledCohort, Ranks, SplitManifest};
use forgescore_core::tensor_io::{read_tensor_shape, ArtifactKind};
use forgescore_core::{AnomalyScores, ForgeryLabel, VideoManifest};
use serde::Serialize;

use crate::journal::Verdict;
use crate::state::ReviewState;
use crate::ReviewError;

/// One labeled cohort prepared for review, with its split seed.
#[derive(Debug, Clone)]
pub struct Session {
    cohort: LabeledCohort,
    seed: u64,
    /// Review candidates per class, most anomalous first.
    queues: BTreeMap<ForgeryLabel, Vec<String>>,
    candidate_class: BTreeMap<String, ForgeryLabel>,
    videos: BTreeMap<String, VideoManifest>,
    frame_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueItem {
    pub video_id: String,
    pub class: u8,
    pub class_name: &'static str,
    pub scores: AnomalyScores,
    pub ranks: Option<Ranks>,
    pub within_class_rank: Option<u32>,
    pub class_size: Option<u32>,
    pub confidence: f64,
    pub frames: usize,
    /// Thumbnail URLs for the first, middle and last frame.
    pub thumbnails: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassProgress {
    pub class: u8,
    pub class_name: &'static str,
    pub candidates: usize,
    pub pending: usize,
    pub accepted: usize,
    pub reassigned: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub cohort_id: String,
    pub classes: Vec<ClassProgress>,
    pub pending_total: usize,
    pub reviewed_total: usize,
    pub last_seq: u64,
    pub finalized: Option<SplitCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCounts {
    /// Indexed by class code.
    pub train: [usize; 4],
    pub val: [usize; 4],
    pub pending_review: usize,
    pub rejected: usize,
}

impl SplitCounts {
    pub fn of(m: &SplitManifest) -> Self {
        let count = |ids: &[String]| {
            let mut c = [0; 4];
            for id in ids {
                if let Some(l) = m.labels.get(id) {
                    c[l.index()] += 1;
                }
            }
            c
        };
        Self {
            train: count(&m.train),
            val: count(&m.val),
            pending_review: m.pending_review.len(),
            rejected: m.rejected.len(),
        }
    }
}

impl Session {
    /// `videos` supplies frame artifacts for thumbnails and may be empty.
    pub fn new(cohort: LabeledCohort, videos: Vec<VideoManifest>, seed: u64) -> Result<Self, ReviewError> {
        let mut queues = BTreeMap::new();
        let mut candidate_class = BTreeMap::new();
        for (class, members) in review_candidates(&cohort) {
            let ids: Vec<String> = members.iter().map(|v| v.video_id.clone()).collect();
            for id in &ids {
                candidate_class.insert(id.clone(), class);
            }
            queues.insert(class, ids);
        }
        let mut frame_counts = BTreeMap::new();
        let mut by_id = BTreeMap::new();
        for v in videos {
            if cohort.get(&v.video_id).is_none() {
                continue;
            }
            if let Some(p) = v.artifact_path(ArtifactKind::Frames) {
                frame_counts.insert(v.video_id.clone(), read_tensor_shape(p)?[0]);
            }
            by_id.insert(v.video_id.clone(), v);
        }
        Ok(Self { cohort, seed, queues, candidate_class, videos: by_id, frame_counts })
    }

    pub fn cohort(&self) -> &LabeledCohort {
        &self.cohort
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn video(&self, video_id: &str) -> Result<&VideoManifest, ReviewError> {
        if self.cohort.get(video_id).is_none() {
            return Err(ReviewError::UnknownVideo(video_id.to_string()));
        }
        self.videos.get(video_id).ok_or_else(|| ReviewError::MissingFrame { video_id: video_id.to_string(), frame: 0 })
    }

    pub fn candidates(&self) -> impl Iterator<Item = (&str, ForgeryLabel)> {
        self.candidate_class.iter().map(|(id, c)| (id.as_str(), *c))
    }

    pub fn parse_class(raw: &str) -> Result<ForgeryLabel, ReviewError> {
        match raw.trim().parse::<u8>().ok().and_then(|c| ForgeryLabel::from_code(c).ok()) {
            Some(l) if l.is_fake() => Ok(l),
            _ => Err(ReviewError::BadClass(raw.to_string())),
        }
    }

    /// Unreviewed candidates of `class`, most anomalous first.
    pub fn queue(&self, state: &ReviewState, class: ForgeryLabel, limit: Option<usize>) -> Vec<QueueItem> {
        let ids = self.queues.get(&class).map(Vec::as_slice).unwrap_or_default();
        ids.iter()
            .filter(|id| !state.is_reviewed(id))
            .take(limit.unwrap_or(usize::MAX))
            .map(|id| {
                let v = self.cohort.get(id).expect("candidate is in the cohort");
                let frames = self.frame_counts.get(id).copied().unwrap_or(0);
                let thumbnails = if frames == 0 {
                    Vec::new()
                } else {
                    let mut idx = vec![0, frames / 2, frames - 1];
                    idx.dedup();
                    idx.iter().map(|f| format!("/api/thumb/{id}/{f}")).collect()
                };
                QueueItem {
                    video_id: id.clone(),
                    class: class.code(),
                    class_name: class.name(),
                    scores: v.scores,
                    ranks: v.ranks,
                    within_class_rank: v.within_class_rank,
                    class_size: v.class_size,
                    confidence: v.confidence,
                    frames,
                    thumbnails,
                }
            })
            .collect()
    }

    /// 404 for unknown videos, 422 for an invalid verdict, 409 for videos outside the review set.
    pub fn check_verdict(&self, video_id: &str, verdict: Verdict) -> Result<(), ReviewError> {
        if self.cohort.get(video_id).is_none() {
            return Err(ReviewError::UnknownVideo(video_id.to_string()));
        }
        verdict.validate()?;
        if !self.candidate_class.contains_key(video_id) {
            return Err(ReviewError::NotCandidate(video_id.to_string()));
        }
        Ok(())
    }

    pub fn pending(&self, state: &ReviewState) -> usize {
        self.candidate_class.keys().filter(|id| !state.is_reviewed(id)).count()
    }

    pub fn progress(&self, state: &ReviewState, finalized: Option<&SplitManifest>) -> Progress {
        let mut classes = Vec::new();
        for class in ForgeryLabel::ANOMALIES {
            let ids = self.queues.get(&class).map(Vec::as_slice).unwrap_or_default();
            let mut p = ClassProgress {
                class: class.code(),
                class_name: class.name(),
                candidates: ids.len(),
                pending: 0,
                accepted: 0,
                reassigned: 0,
                rejected: 0,
            };
            for id in ids {
                match state.verdicts.get(id).map(|e| e.verdict) {
                    None => p.pending += 1,
                    Some(Verdict::Accept) => p.accepted += 1,
                    Some(Verdict::Reassign(_)) => p.reassigned += 1,
                    Some(Verdict::Reject) => p.rejected += 1,
                }
            }
            classes.push(p);
        }
        let pending_total = classes.iter().map(|c| c.pending).sum();
        let reviewed_total = classes.iter().map(|c| c.candidates - c.pending).sum();
        Progress {
            cohort_id: self.cohort.cohort_id.clone(),
            classes,
            pending_total,
            reviewed_total,
            last_seq: state.last_seq,
            finalized: finalized.map(SplitCounts::of),
        }
    }

    /// The labeled cohort with every effective verdict applied.
    pub fn reviewed_cohort(&self, state: &ReviewState) -> LabeledCohort {
        let mut c = self.cohort.clone();
        for v in &mut c.videos {
            v.review_state = state.status(&v.video_id);
        }
        c
    }

    pub fn finalize(
        &self,
        state: &ReviewState,
        force: bool,
        created_at: Option<String>,
    ) -> Result<SplitManifest, ReviewError> {
        let pending = self.pending(state);
        if pending > 0 && !force {
            return Err(ReviewError::PendingRemain(pending));
        }
        let mut m = split_cohort(&self.reviewed_cohort(state), self.seed)?;
        m.created_at = created_at;
        Ok(m)
    }
}
