use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::LabelError;

/// How a within-class rank maps onto the normalized rank `r̂`.
///
/// `Verbatim` uses `r̂ = r / n`, so the least anomalous member of a class
/// (largest `r`) receives the largest loss weight. `Inverted` uses
/// `r̂ = (n − r + 1) / n`, emphasizing the most anomalous members instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceOrientation {
    #[default]
    Verbatim,
    Inverted,
}

impl std::str::FromStr for ConfidenceOrientation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbatim" => Ok(Self::Verbatim),
            "inverted" => Ok(Self::Inverted),
            other => Err(format!("unknown confidence orientation `{other}` (verbatim|inverted)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub normalized_rank: f64,
    /// `ln(e + r̂)`, in `(1, ln(e + 1)]`.
    pub alpha: f64,
}

pub fn confidence_weight(rank: usize, n: usize, orientation: ConfidenceOrientation) -> Result<Confidence, LabelError> {
    if n == 0 || rank == 0 || rank > n {
        return Err(LabelError::RankOutOfRange { rank, n });
    }
    let r = match orientation {
        ConfidenceOrientation::Verbatim => rank,
        ConfidenceOrientation::Inverted => n - rank + 1,
    };
    let normalized_rank = r as f64 / n as f64;
    Ok(Confidence { normalized_rank, alpha: (E + normalized_rank).ln() })
}
