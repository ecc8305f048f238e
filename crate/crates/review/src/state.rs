use std::collections::BTreeMap;

use forgescore_core::labels::ReviewStatus;
use serde::Serialize;

use crate::journal::{ReviewEvent, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Effective {
    pub verdict: Verdict,
    pub reviewer: String,
    pub seq: u64,
}

/// Latest verdict per video; videos without one are still automatic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReviewState {
    pub verdicts: BTreeMap<String, Effective>,
    pub last_seq: u64,
}

impl ReviewState {
    pub fn apply(&mut self, ev: &ReviewEvent) {
        self.verdicts
            .insert(ev.video_id.clone(), Effective { verdict: ev.verdict, reviewer: ev.reviewer.clone(), seq: ev.seq });
        self.last_seq = self.last_seq.max(ev.seq);
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a ReviewEvent>) -> Self {
        let mut s = Self::default();
        for ev in events {
            s.apply(ev);
        }
        s
    }

    pub fn status(&self, video_id: &str) -> ReviewStatus {
        self.verdicts.get(video_id).map_or(ReviewStatus::Auto, |e| e.verdict.status())
    }

    pub fn is_reviewed(&self, video_id: &str) -> bool {
        self.verdicts.contains_key(video_id)
    }

    /// True when the video's effective verdict already is `verdict` from `reviewer`.
    pub fn is_duplicate(&self, video_id: &str, verdict: Verdict, reviewer: &str) -> bool {
        self.verdicts.get(video_id).is_some_and(|e| e.verdict == verdict && e.reviewer == reviewer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use forgescore_core::ForgeryLabel;

    fn ev(seq: u64, id: &str, verdict: Verdict) -> ReviewEvent {
        ReviewEvent { seq, timestamp: String::new(), video_id: id.into(), verdict, reviewer: "r".into() }
    }

    #[test]
    fn later_events_supersede() {
        let events = [
            ev(1, "a", Verdict::Accept),
            ev(2, "b", Verdict::Reject),
            ev(3, "a", Verdict::Reassign(ForgeryLabel::Motion)),
        ];
        let s = ReviewState::replay(&events);
        assert_eq!(s.status("a"), ReviewStatus::Reassigned(ForgeryLabel::Motion));
        assert_eq!(s.status("b"), ReviewStatus::Rejected);
        assert_eq!(s.status("c"), ReviewStatus::Auto);
        assert_eq!(s.last_seq, 3);
        assert!(s.is_duplicate("b", Verdict::Reject, "r"));
        assert!(!s.is_duplicate("b", Verdict::Reject, "other"));
    }
}
