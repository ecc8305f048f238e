//! Random verdict sequences through the service, checked against a fold
//! written independently of the service's state type.

use std::collections::BTreeMap;

use forgescore_core::labels::{label_cohort, ConfidenceOrientation, LabeledCohort, ScoredVideo};
use forgescore_core::rng::{substream, Rng};
use forgescore_core::{AnomalyScores, ForgeryLabel};
use forgescore_review::{Journal, ReviewError, ReviewService, ReviewState, ServiceConfig, Session, Verdict};
use rand::seq::IndexedRandom;
use rand::Rng as _;

fn random_cohort(rng: &mut Rng) -> LabeledCohort {
    let fakes = rng.random_range(3..=24);
    let reals = rng.random_range(0..=6);
    let mut videos = Vec::new();
    for i in 0..fakes + reals {
        videos.push(ScoredVideo {
            video_id: format!("v{i:02}"),
            is_real: i >= fakes,
            scores: AnomalyScores {
                spatial: rng.random_range(0..20) as f64,
                appearance: rng.random_range(0..20) as f64,
                motion: rng.random_range(0..20) as f64,
            },
        });
    }
    label_cohort("c", &videos, ConfidenceOrientation::Verbatim).unwrap()
}

/// Candidate ids: top ⌈n/5⌉ of each class by (within-class rank, id).
fn oracle_candidates(c: &LabeledCohort) -> BTreeMap<String, ForgeryLabel> {
    let mut out = BTreeMap::new();
    for class in ForgeryLabel::ANOMALIES {
        let mut m: Vec<_> = c.videos.iter().filter(|v| !v.is_real && v.label == class).collect();
        m.sort_by(|a, b| a.within_class_rank.cmp(&b.within_class_rank).then(a.video_id.cmp(&b.video_id)));
        let k = m.len().div_ceil(5);
        for v in &m[..k] {
            out.insert(v.video_id.clone(), class);
        }
    }
    out
}

fn random_verdict(rng: &mut Rng) -> Verdict {
    match rng.random_range(0..7) {
        0 | 1 => Verdict::Accept,
        2 | 3 => Verdict::Reject,
        4 => Verdict::Reassign(ForgeryLabel::Spatial),
        5 => Verdict::Reassign(ForgeryLabel::Motion),
        _ => Verdict::Reassign([ForgeryLabel::Appearance, ForgeryLabel::Real][rng.random_range(0..2)]),
    }
}

#[test]
fn replay_matches_fold_oracle_for_1000_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = substream(2024, "review/replay");
    for case in 0..1000 {
        let cohort = random_cohort(&mut rng);
        let candidates = oracle_candidates(&cohort);
        let ids: Vec<String> = cohort.videos.iter().map(|v| v.video_id.clone()).collect();
        let path = tmp.path().join(format!("j{case}.jsonl"));
        let (journal, events) = Journal::open(&path).unwrap();
        let session = Session::new(cohort.clone(), Vec::new(), case).unwrap();
        let svc = ReviewService::open(session, journal, &events, ServiceConfig::default()).unwrap();

        // oracle: id → (verdict, reviewer); seq counts written events
        let mut fold: BTreeMap<String, (Verdict, String)> = BTreeMap::new();
        let mut seq = 0u64;
        let mut prefix_states = vec![ReviewState::default()];
        for _ in 0..rng.random_range(0..25) {
            let id = if rng.random_bool(0.1) { "ghost".to_string() } else { ids.choose(&mut rng).unwrap().clone() };
            let verdict = random_verdict(&mut rng);
            let reviewer = ["ann", "bo"][rng.random_range(0..2)].to_string();
            let result = svc.review(&id, verdict, &reviewer);
            let known = ids.contains(&id);
            let valid = verdict != Verdict::Reassign(ForgeryLabel::Real);
            match result {
                Err(ReviewError::UnknownVideo(_)) => assert!(!known),
                Err(ReviewError::InvalidVerdict(_)) => assert!(known && !valid),
                Err(ReviewError::NotCandidate(_)) => assert!(known && valid && !candidates.contains_key(&id)),
                Err(e) => panic!("case {case}: {e}"),
                Ok((ev, duplicate)) => {
                    assert!(known && valid && candidates.contains_key(&id));
                    let same = fold.get(&id) == Some(&(verdict, reviewer.clone()));
                    assert_eq!(duplicate, same, "case {case}");
                    if !same {
                        seq += 1;
                        assert_eq!(ev.seq, seq);
                        fold.insert(id, (verdict, reviewer));
                        prefix_states.push(svc.state());
                    }
                }
            }
        }

        let state = svc.state();
        let expect: BTreeMap<String, (Verdict, String)> =
            state.verdicts.iter().map(|(k, e)| (k.clone(), (e.verdict, e.reviewer.clone()))).collect();
        assert_eq!(expect, fold, "case {case}");

        // replay from disk, and every prefix of it
        drop(svc);
        let events = forgescore_review::read_journal(&path).unwrap();
        assert_eq!(events.len() as u64, seq);
        assert_eq!(ReviewState::replay(&events), state);
        for (k, s) in prefix_states.iter().enumerate() {
            assert_eq!(&ReviewState::replay(&events[..k]), s, "case {case} prefix {k}");
        }

        // the finalized split honors every effective verdict
        let (journal, events) = Journal::open(&path).unwrap();
        let svc = ReviewService::open(
            Session::new(cohort.clone(), Vec::new(), case).unwrap(),
            journal,
            &events,
            ServiceConfig::default(),
        )
        .unwrap();
        let pending = candidates.keys().filter(|id| !fold.contains_key(*id)).count();
        if pending > 0 {
            assert!(matches!(svc.finalize(false), Err(ReviewError::PendingRemain(n)) if n == pending));
        }
        let m = svc.finalize(true).unwrap();
        m.check_partition(ids.iter().map(String::as_str)).unwrap();
        for v in &cohort.videos {
            let id = &v.video_id;
            match fold.get(id).map(|f| f.0) {
                Some(Verdict::Reject) => assert!(m.rejected.contains(id) && !m.labels.contains_key(id)),
                Some(Verdict::Accept) => {
                    assert!(m.val.contains(id));
                    assert_eq!(m.labels[id], v.label);
                }
                Some(Verdict::Reassign(l)) => {
                    assert!(m.val.contains(id));
                    assert_eq!(m.labels[id], l);
                }
                None if candidates.contains_key(id) => assert!(m.pending_review.contains(id)),
                None if v.is_real => assert!(m.train.contains(id) || m.val.contains(id)),
                None => assert!(m.train.contains(id)),
            }
        }
    }
}
