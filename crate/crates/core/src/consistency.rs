//! Appearance consistency of per-frame embedding streams.
//!
//! The consistency score blends the mean cosine similarity of consecutive
//! frames with the mean over non-overlapping windows of each window's own
//! consecutive similarity. Appearance *anomaly* is one minus the average of
//! the per-stream scores, so higher means more anomalous.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_io::EmbeddingSequence;

#[derive(Debug, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("cosine similarity of a zero-norm vector")]
    ZeroNorm,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("consistency needs at least 2 frames, got {0}")]
    TooShort(usize),
    #[error("window size must be at least 2, got {0}")]
    BadWindow(usize),
    #[error("no embedding stream available")]
    MissingStream,
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, ConsistencyError> {
    if a.len() != b.len() {
        return Err(ConsistencyError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ConsistencyError::ZeroNorm);
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical vectors give exactly 1
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub window: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { window: 5, alpha: 0.5, beta: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consecutive_term: f64,
    pub window_term: f64,
    pub s_score: f64,
    /// Windows that contributed to `window_term`.
    pub windows: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn appearance_consistency(
    seq: &EmbeddingSequence,
    cfg: ConsistencyConfig,
) -> Result<ConsistencyReport, ConsistencyError> {
    let t = seq.len();
    if t < 2 {
        return Err(ConsistencyError::TooShort(t));
    }
    if cfg.window < 2 {
        return Err(ConsistencyError::BadWindow(cfg.window));
    }
    let pair_sims: Vec<f64> = (1..t).map(|i| cosine_sim(seq.row(i - 1), seq.row(i))).collect::<Result<_, _>>()?;
    let consecutive_term = mean(&pair_sims);

    // Window k covers frames [k·w, min((k+1)·w, T)); its pairs are
    // pair_sims[k·w .. end−1]. A trailing window needs at least 2 frames.
    let window_scores: Vec<f64> = (0..t)
        .step_by(cfg.window)
        .filter_map(|start| {
            let end = (start + cfg.window).min(t);
            (end - start >= 2).then(|| mean(&pair_sims[start..end - 1]))
        })
        .collect();
    let window_term = mean(&window_scores);

    Ok(ConsistencyReport {
        consecutive_term,
        window_term,
        s_score: cfg.alpha * consecutive_term + cfg.beta * window_term,
        windows: window_scores.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceScore {
    /// Stream name → consistency score.
    pub per_stream: BTreeMap<String, f64>,
    /// `1 − mean(per_stream)`.
    pub anomaly: f64,
}

/// Appearance anomaly from the CLIP and DINO streams. With one stream
/// missing the other is used alone.
pub fn appearance_anomaly(
    clip: Option<&EmbeddingSequence>,
    dino: Option<&EmbeddingSequence>,
    cfg: ConsistencyConfig,
) -> Result<AppearanceScore, ConsistencyError> {
    let mut per_stream = BTreeMap::new();
    for (name, stream) in [("clip", clip), ("dino", dino)] {
        if let Some(s) = stream {
            per_stream.insert(name.to_string(), appearance_consistency(s, cfg)?.s_score);
        }
    }
    match per_stream.len() {
        0 => return Err(ConsistencyError::MissingStream),
        1 => log::warn!(
            "only the {} stream is available; appearance score uses it alone",
            per_stream.keys().next().unwrap()
        ),
        _ => {}
    }
    let avg = per_stream.values().sum::<f64>() / per_stream.len() as f64;
    Ok(AppearanceScore { per_stream, anomaly: 1.0 - avg })
}

pub fn appearance_anomaly_score(clip: &EmbeddingSequence, dino: &EmbeddingSequence) -> Result<f64, ConsistencyError> {
    Ok(appearance_anomaly(Some(clip), Some(dino), ConsistencyConfig::default())?.anomaly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::tensor_io::Tensor;
    use rand::Rng;

    fn seq(rows: &[Vec<f64>]) -> EmbeddingSequence {
        let d = rows[0].len();
        EmbeddingSequence::new(Tensor::new(vec![rows.len(), d], rows.concat()).unwrap()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(ConsistencyError::ZeroNorm));
        assert_eq!(cosine_sim(&[1.0], &[1.0, 0.0]), Err(ConsistencyError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn constant_embeddings_are_fully_consistent() {
        let v = vec![0.3, -1.7, 2.9, 0.01];
        let r = appearance_consistency(&seq(&vec![v; 9]), ConsistencyConfig::default()).unwrap();
        assert_eq!((r.consecutive_term, r.window_term, r.s_score), (1.0, 1.0, 1.0));
    }

    #[test]
    fn alternating_orthogonal_scores_zero() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect();
        let r = appearance_consistency(&seq(&rows), ConsistencyConfig::default()).unwrap();
        assert_eq!((r.consecutive_term, r.window_term, r.s_score), (0.0, 0.0, 0.0));
        assert_eq!(r.windows, 2);
    }

    #[test]
    fn trailing_single_frame_window_is_dropped() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64]).collect();
        let r = appearance_consistency(&seq(&rows), ConsistencyConfig::default()).unwrap();
        assert_eq!(r.windows, 1);
        let rows7: Vec<Vec<f64>> = (0..7).map(|i| vec![1.0, i as f64]).collect();
        assert_eq!(appearance_consistency(&seq(&rows7), ConsistencyConfig::default()).unwrap().windows, 2);
    }

    #[test]
    fn window_term_averages_windows() {
        // pairs: (0,1) same, (1,2) orthogonal, ... window 2 → windows {0,1},{2,3}
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let cfg = ConsistencyConfig { window: 2, ..Default::default() };
        let r = appearance_consistency(&seq(&rows), cfg).unwrap();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.consecutive_term - (1.0 + 0.0 + half) / 3.0).abs() < 1e-15);
        assert!((r.window_term - (1.0 + half) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bad_window_rejected() {
        let rows = vec![vec![1.0], vec![1.0]];
        let cfg = ConsistencyConfig { window: 1, ..Default::default() };
        assert_eq!(appearance_consistency(&seq(&rows), cfg), Err(ConsistencyError::BadWindow(1)));
    }

    #[test]
    fn anomaly_is_one_minus_stream_mean() {
        let v = vec![1.0, 2.0];
        let s = seq(&vec![v; 4]);
        assert_eq!(appearance_anomaly_score(&s, &s).unwrap(), 0.0);

        // streams with consistency exactly 0.5 and 0 average to 0.25 → anomaly 0.75
        let c = 0.5f64;
        let a = vec![vec![1.0, 0.0], vec![c, (1.0 - c * c).sqrt()]];
        let b = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let score = appearance_anomaly_score(&seq(&a), &seq(&b)).unwrap();
        assert!((score - 0.75).abs() < 1e-15);
        assert_eq!(appearance_anomaly(None, None, ConsistencyConfig::default()), Err(ConsistencyError::MissingStream));
        let single = appearance_anomaly(Some(&seq(&a)), None, ConsistencyConfig::default()).unwrap();
        assert_eq!(single.per_stream.len(), 1);
    }

    #[test]
    fn invariant_to_positive_rescaling() {
        let mut rng = substream(9, "rescale");
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..11).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let c = rng.random_range(0.01..100.0);
                    r.iter().map(|x| x * c).collect()
                })
                .collect();
            let a = appearance_consistency(&seq(&rows), ConsistencyConfig::default()).unwrap();
            let b = appearance_consistency(&seq(&scaled), ConsistencyConfig::default()).unwrap();
            assert!((a.s_score - b.s_score).abs() < 1e-12);
            assert!((a.consecutive_term - b.consecutive_term).abs() < 1e-12);
            assert!((a.window_term - b.window_term).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_lowers_consistency() {
        let scores: Vec<f64> = (0..10)
            .map(|k| {
                let rate = 0.05 * k as f64;
                // angle grows quadratically: each step rotates a bit more than the last
                let rows: Vec<Vec<f64>> = (0..12)
                    .map(|t| {
                        let theta = rate * (t * t) as f64 / 4.0;
                        vec![theta.cos(), theta.sin(), 0.2]
                    })
                    .collect();
                appearance_consistency(&seq(&rows), ConsistencyConfig::default()).unwrap().s_score
            })
            .collect();
        assert!(scores.windows(2).all(|w| w[1] < w[0]), "{scores:?}");
    }

    #[test]
    fn anomaly_bounds() {
        let mut rng = substream(4, "bounds");
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let s = appearance_anomaly_score(&seq(&rows), &seq(&rows)).unwrap();
            assert!((0.0..=2.0).contains(&s));
            let pos: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x.abs() + 0.01).collect()).collect();
            let s = appearance_anomaly_score(&seq(&pos), &seq(&pos)).unwrap();
            assert!((0.0..=1.0).contains(&s));
        }
    }
}
