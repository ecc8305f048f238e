use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::confidence::{confidence_weight, ConfidenceOrientation};
use super::{AnomalyScores, ForgeryLabel, LabelError, LabeledCohort, LabeledVideo, ReviewStatus};

/// Cohort ranks of one video, 1 = most anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranks {
    pub spatial: u32,
    pub appearance: u32,
    pub motion: u32,
}

impl Ranks {
    pub fn get(&self, kind: ForgeryLabel) -> Option<u32> {
        match kind {
            ForgeryLabel::Spatial => Some(self.spatial),
            ForgeryLabel::Appearance => Some(self.appearance),
            ForgeryLabel::Motion => Some(self.motion),
            ForgeryLabel::Real => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankTable {
    pub ranks: BTreeMap<String, Ranks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredVideo {
    pub video_id: String,
    pub is_real: bool,
    pub scores: AnomalyScores,
}

/// Orders `ids` by `score` descending, ties by ascending id, and returns
/// the 1-based position of each.
fn descending_ranks(mut items: Vec<(&str, f64)>) -> BTreeMap<&str, u32> {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().enumerate().map(|(i, (id, _))| (id, i as u32 + 1)).collect()
}

/// Ranks every video independently on each anomaly type.
pub fn rank_cohort(scores: &BTreeMap<String, AnomalyScores>) -> Result<RankTable, LabelError> {
    if scores.is_empty() {
        return Err(LabelError::EmptyCohort);
    }
    for (id, s) in scores {
        for kind in ForgeryLabel::ANOMALIES {
            let value = s.get(kind).expect("anomaly kind");
            if !value.is_finite() {
                return Err(LabelError::NonFiniteScore { video_id: id.clone(), kind, value });
            }
        }
    }
    let per_kind: Vec<BTreeMap<&str, u32>> = ForgeryLabel::ANOMALIES
        .iter()
        .map(|&kind| descending_ranks(scores.iter().map(|(id, s)| (id.as_str(), s.get(kind).unwrap())).collect()))
        .collect();
    let ranks = scores
        .keys()
        .map(|id| {
            let r = Ranks {
                spatial: per_kind[0][id.as_str()],
                appearance: per_kind[1][id.as_str()],
                motion: per_kind[2][id.as_str()],
            };
            (id.clone(), r)
        })
        .collect();
    Ok(RankTable { ranks })
}

/// Labels each video with the anomaly type holding its numerically smallest
/// rank; equal ranks resolve Spatial, then Appearance, then Motion.
pub fn assign_labels(table: &RankTable) -> BTreeMap<String, ForgeryLabel> {
    table
        .ranks
        .iter()
        .map(|(id, r)| {
            let mut best = ForgeryLabel::Spatial;
            for kind in [ForgeryLabel::Appearance, ForgeryLabel::Motion] {
                if r.get(kind) < r.get(best) {
                    best = kind;
                }
            }
            (id.clone(), best)
        })
        .collect()
}

/// Re-ranks each class's members by that class's own score (descending,
/// ties by id). Returns `(rank, class size)` per video.
pub fn within_class_ranks(
    labels: &BTreeMap<String, ForgeryLabel>,
    scores: &BTreeMap<String, AnomalyScores>,
) -> Result<BTreeMap<String, (u32, u32)>, LabelError> {
    let mut out = BTreeMap::new();
    for kind in ForgeryLabel::ANOMALIES {
        let mut members = Vec::new();
        for (id, _) in labels.iter().filter(|(_, l)| **l == kind) {
            let s = scores.get(id).ok_or_else(|| LabelError::MissingScore(id.clone()))?;
            members.push((id.as_str(), s.get(kind).unwrap()));
        }
        let n = members.len() as u32;
        for (id, rank) in descending_ranks(members) {
            out.insert(id.to_string(), (rank, n));
        }
    }
    Ok(out)
}

/// Runs ranking, labeling and confidence weighting over a scored cohort.
/// Real videos are labeled [`ForgeryLabel::Real`] with unit weight.
pub fn label_cohort(
    cohort_id: &str,
    videos: &[ScoredVideo],
    orientation: ConfidenceOrientation,
) -> Result<LabeledCohort, LabelError> {
    let mut seen = std::collections::BTreeSet::new();
    for v in videos {
        if !seen.insert(v.video_id.as_str()) {
            return Err(LabelError::DuplicateVideo(v.video_id.clone()));
        }
    }
    let fake_scores: BTreeMap<String, AnomalyScores> =
        videos.iter().filter(|v| !v.is_real).map(|v| (v.video_id.clone(), v.scores)).collect();
    if videos.is_empty() {
        return Err(LabelError::EmptyCohort);
    }
    // an all-real cohort has nothing to rank
    let (table, labels, class_ranks) = if fake_scores.is_empty() {
        (RankTable::default(), BTreeMap::new(), BTreeMap::new())
    } else {
        let table = rank_cohort(&fake_scores)?;
        let labels = assign_labels(&table);
        let class_ranks = within_class_ranks(&labels, &fake_scores)?;
        (table, labels, class_ranks)
    };

    let mut out = Vec::with_capacity(videos.len());
    for v in videos {
        if v.is_real {
            out.push(LabeledVideo {
                video_id: v.video_id.clone(),
                is_real: true,
                scores: v.scores,
                ranks: None,
                label: ForgeryLabel::Real,
                within_class_rank: None,
                class_size: None,
                normalized_rank: None,
                confidence: 1.0,
                review_state: ReviewStatus::Auto,
            });
            continue;
        }
        let (rank, n) = class_ranks[&v.video_id];
        let c = confidence_weight(rank as usize, n as usize, orientation)?;
        out.push(LabeledVideo {
            video_id: v.video_id.clone(),
            is_real: false,
            scores: v.scores,
            ranks: Some(table.ranks[&v.video_id]),
            label: labels[&v.video_id],
            within_class_rank: Some(rank),
            class_size: Some(n),
            normalized_rank: Some(c.normalized_rank),
            confidence: c.alpha,
            review_state: ReviewStatus::Auto,
        });
    }
    out.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(LabeledCohort { cohort_id: cohort_id.to_string(), orientation, videos: out })
}
