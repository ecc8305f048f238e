use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ForgeryLabel, LabelError, LabeledCohort, LabeledVideo, ReviewStatus};
use crate::rng::substream;

/// `⌈0.2·n⌉`: how many members of a class are held for review (fakes) or
/// sampled into validation (reals).
pub fn pending_count(n: usize) -> usize {
    n.div_ceil(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub cohort_id: String,
    pub seed: u64,
    /// Set only by interactive finalization; CLI outputs keep timestamps in `run.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub pending_review: Vec<String>,
    pub rejected: Vec<String>,
    /// Final label of every non-rejected video (review reassignments applied).
    pub labels: BTreeMap<String, ForgeryLabel>,
    /// Loss weight α of every non-rejected video.
    pub weights: BTreeMap<String, f64>,
}

impl SplitManifest {
    pub fn is_final(&self) -> bool {
        self.pending_review.is_empty()
    }

    /// Checks `train ⊎ val ⊎ pending ⊎ rejected` equals `ids` exactly.
    pub fn check_partition<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.pending_review).chain(&self.rejected) {
            if !seen.insert(id.as_str()) {
                return Err(format!("video {id} assigned twice"));
            }
        }
        let all: BTreeSet<&str> = ids.into_iter().collect();
        if let Some(missing) = all.difference(&seen).next() {
            return Err(format!("video {missing} not assigned"));
        }
        if let Some(extra) = seen.difference(&all).next() {
            return Err(format!("video {extra} is not in the cohort"));
        }
        Ok(())
    }
}

/// Top `⌈0.2·n⌉` members of each anomaly class by within-class rank, most
/// anomalous first.
pub fn review_candidates(cohort: &LabeledCohort) -> BTreeMap<ForgeryLabel, Vec<&LabeledVideo>> {
    let mut out = BTreeMap::new();
    for kind in ForgeryLabel::ANOMALIES {
        let mut members: Vec<&LabeledVideo> = cohort.videos.iter().filter(|v| !v.is_real && v.label == kind).collect();
        members.sort_by_key(|v| (v.within_class_rank.unwrap_or(u32::MAX), v.video_id.clone()));
        let k = pending_count(members.len());
        members.truncate(k);
        out.insert(kind, members);
    }
    out
}

/// Splits a labeled cohort. Review candidates go to validation once accepted
/// or reassigned and stay pending otherwise; rejected videos are dropped; the
/// other fakes train. Reals are sampled 20% into validation from `seed`.
pub fn split_cohort(cohort: &LabeledCohort, seed: u64) -> Result<SplitManifest, LabelError> {
    let mut ids = BTreeSet::new();
    for v in &cohort.videos {
        if !ids.insert(v.video_id.as_str()) {
            return Err(LabelError::DuplicateVideo(v.video_id.clone()));
        }
        if !v.is_real && v.within_class_rank.is_none() {
            return Err(LabelError::Unlabeled(v.video_id.clone()));
        }
    }
    let candidates: BTreeSet<&str> =
        review_candidates(cohort).values().flatten().map(|v| v.video_id.as_str()).collect();

    let mut m = SplitManifest {
        cohort_id: cohort.cohort_id.clone(),
        seed,
        created_at: None,
        train: Vec::new(),
        val: Vec::new(),
        pending_review: Vec::new(),
        rejected: Vec::new(),
        labels: BTreeMap::new(),
        weights: BTreeMap::new(),
    };

    let mut reals = Vec::new();
    for v in &cohort.videos {
        let id = v.video_id.clone();
        if v.review_state == ReviewStatus::Rejected {
            m.rejected.push(id);
            continue;
        }
        m.labels.insert(id.clone(), v.final_label());
        m.weights.insert(id.clone(), v.confidence);
        if v.is_real {
            reals.push(id);
        } else if candidates.contains(v.video_id.as_str()) {
            match v.review_state {
                ReviewStatus::Auto => m.pending_review.push(id),
                _ => m.val.push(id),
            }
        } else {
            m.train.push(id);
        }
    }

    reals.sort();
    let mut rng = substream(seed, "split/real");
    reals.shuffle(&mut rng);
    let k = pending_count(reals.len());
    m.val.extend(reals.drain(..k));
    m.train.extend(reals);

    m.train.sort();
    m.val.sort();
    m.pending_review.sort();
    m.rejected.sort();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{label_cohort, AnomalyScores, ConfidenceOrientation, ScoredVideo};

    fn cohort(fakes: usize, reals: usize) -> LabeledCohort {
        let mut videos = Vec::new();
        for i in 0..fakes {
            videos.push(ScoredVideo {
                video_id: format!("f{i:03}"),
                is_real: false,
                scores: AnomalyScores { spatial: 0.0, appearance: 1.0 + i as f64, motion: 0.0 },
            });
        }
        for i in 0..reals {
            videos.push(ScoredVideo {
                video_id: format!("r{i:03}"),
                is_real: true,
                scores: AnomalyScores { spatial: 0.0, appearance: 0.0, motion: 0.0 },
            });
        }
        // Every fake ties on spatial/motion, so give each a strictly best appearance rank.
        let mut c = label_cohort("c", &videos, ConfidenceOrientation::Verbatim).unwrap();
        for v in &mut c.videos {
            if !v.is_real {
                v.label = ForgeryLabel::Appearance;
            }
        }
        // recompute within-class ranks for the forced labels
        let n = fakes as u32;
        for v in &mut c.videos {
            if !v.is_real {
                let i: u32 = v.video_id[1..].parse().unwrap();
                v.within_class_rank = Some(n - i);
                v.class_size = Some(n);
            }
        }
        c
    }

    #[test]
    fn ten_fakes_hold_two_for_review() {
        let c = cohort(10, 0);
        let s = split_cohort(&c, 1).unwrap();
        assert_eq!(s.pending_review.len(), 2);
        assert_eq!(s.train.len(), 8);
        // most anomalous appearance scores are f009 and f008
        assert_eq!(s.pending_review, ["f008", "f009"]);
        assert!(!s.is_final());
    }

    #[test]
    fn reals_sample_twenty_percent_reproducibly() {
        let c = cohort(0, 280);
        let a = split_cohort(&c, 42).unwrap();
        let b = split_cohort(&c, 42).unwrap();
        let other = split_cohort(&c, 43).unwrap();
        assert_eq!(a.val.len(), 56);
        assert_eq!(a.train.len(), 224);
        assert_eq!(a, b);
        assert_ne!(a.val, other.val);
        assert!(a.labels.values().all(|l| *l == ForgeryLabel::Real));
    }

    #[test]
    fn review_verdicts_are_honored() {
        let mut c = cohort(10, 5);
        let set = |c: &mut LabeledCohort, id: &str, st: ReviewStatus| {
            c.videos.iter_mut().find(|v| v.video_id == id).unwrap().review_state = st;
        };
        set(&mut c, "f009", ReviewStatus::Reassigned(ForgeryLabel::Motion));
        set(&mut c, "f008", ReviewStatus::Rejected);
        let s = split_cohort(&c, 3).unwrap();
        assert!(s.val.contains(&"f009".to_string()));
        assert_eq!(s.labels["f009"], ForgeryLabel::Motion);
        assert_eq!(s.rejected, ["f008"]);
        assert!(!s.labels.contains_key("f008"));
        assert!(s.pending_review.is_empty());
        s.check_partition(c.videos.iter().map(|v| v.video_id.as_str())).unwrap();
    }

    #[test]
    fn unranked_fake_is_unlabeled() {
        let mut c = cohort(3, 0);
        c.videos[0].within_class_rank = None;
        assert!(matches!(split_cohort(&c, 0), Err(LabelError::Unlabeled(_))));
    }

    #[test]
    fn pending_count_is_ceiling_of_fifth() {
        let got: Vec<usize> = [0, 1, 4, 5, 6, 10, 11, 20, 221].iter().map(|&n| pending_count(n)).collect();
        assert_eq!(got, [0, 1, 1, 1, 2, 2, 3, 4, 45]);
    }
}
