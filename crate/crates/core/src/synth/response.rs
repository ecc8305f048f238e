use crate::warp::{Perturbation, WarpError};
use crate::Tensor;

/// Lowest and highest spatial frequency (cycles/pixel) assigned to feature channels.
pub const FREQ_RANGE: (f64, f64) = (0.01, 0.12);

const PROBE_SIZE: usize = 64;
const PROBE_MARGIN: usize = 14;

/// Stand-in for how backbone features react to frame perturbations: feature
/// channel `k` of `n` tracks one spatial frequency, and its response to a
/// perturbation is the gain that perturbation applies to a cosine grating at
/// that frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel {
    pub token_freqs: Vec<f64>,
    pub depth_freqs: Vec<f64>,
}

pub fn channel_frequency(k: usize, n: usize) -> f64 {
    let (lo, hi) = FREQ_RANGE;
    if n <= 1 {
        return lo;
    }
    lo + (hi - lo) * k as f64 / (n - 1) as f64
}

/// Amplitude gain of `p` on a horizontal cosine grating of frequency `freq`,
/// measured away from the clamped borders. Exactly 1 when `p` is the identity.
pub fn probe_gain(p: &Perturbation, freq: f64) -> Result<f64, WarpError> {
    let n = PROBE_SIZE;
    let wave: Vec<f64> = (0..n).map(|x| (2.0 * std::f64::consts::PI * freq * x as f64).cos()).collect();
    let probe = Tensor::from_fn(vec![n, n], |i| 0.5 + 0.4 * wave[i % n]).expect("probe shape");
    let out = p.apply(&probe)?;
    let (mut num, mut den) = (0.0, 0.0);
    for y in PROBE_MARGIN..n - PROBE_MARGIN {
        for x in PROBE_MARGIN..n - PROBE_MARGIN {
            let i = y * n + x;
            num += (out.data()[i] - 0.5) * wave[x];
            den += (probe.data()[i] - 0.5) * wave[x];
        }
    }
    Ok((num / den).clamp(0.0, 1.0))
}

impl ResponseModel {
    pub fn new(token_dim: usize, depth_channels: usize) -> Self {
        Self {
            token_freqs: (0..token_dim).map(|k| channel_frequency(k, token_dim)).collect(),
            depth_freqs: (0..depth_channels).map(|k| channel_frequency(k, depth_channels)).collect(),
        }
    }

    /// Per-channel gains for token and depth features.
    pub fn gains(&self, p: &Perturbation) -> Result<(Vec<f64>, Vec<f64>), WarpError> {
        let g = |fs: &[f64]| fs.iter().map(|f| probe_gain(p, *f)).collect::<Result<Vec<_>, _>>();
        Ok((g(&self.token_freqs)?, g(&self.depth_freqs)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize_has_unit_gain() {
        let p = Perturbation::Resize { ratio: 1.0 };
        for k in 0..8 {
            assert_eq!(probe_gain(&p, channel_frequency(k, 8)).unwrap(), 1.0);
        }
    }

    #[test]
    fn blur_gain_tracks_gaussian_transfer() {
        // continuous transfer function of a Gaussian: exp(−2π²σ²f²)
        let sigma = 3.0;
        let p = Perturbation::Blur { sigma };
        for f in [0.01, 0.03, 0.06] {
            let expect = (-2.0 * std::f64::consts::PI.powi(2) * sigma * sigma * f * f).exp();
            let got = probe_gain(&p, f).unwrap();
            assert!((got - expect).abs() < 0.01, "f={f}: {got} vs {expect}");
        }
    }

    #[test]
    fn blur_attenuates_high_channels_more() {
        let m = ResponseModel::new(16, 4);
        let (tok, depth) = m.gains(&Perturbation::Blur { sigma: 3.0 }).unwrap();
        assert!(tok.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(depth.len(), 4);
        assert!(tok[15] < 0.2 && tok[0] > 0.9);
    }
}
