//! Post-processing perturbations used by the robustness harness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{sample_into, ImageDims, WarpError};
use crate::tensor_io::Tensor;

/// Normalized 1-D Gaussian taps over `[-⌈3σ⌉, ⌈3σ⌉]`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>, WarpError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(WarpError::BadSigma(sigma));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

/// Separable Gaussian blur with edge clamping. `frame` is `[H, W]` or `[H, W, C]`.
pub fn gaussian_blur(frame: &Tensor, sigma: f64) -> Result<Tensor, WarpError> {
    let dims = ImageDims::of(frame)?;
    let k = gaussian_kernel(sigma)?;
    let r = (k.len() / 2) as isize;
    let ImageDims { height, width, channels } = dims;
    let src = frame.data();
    let idx = |y: usize, x: usize, c: usize| (y * width + x) * channels + c;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                horiz[idx(y, x, c)] = k
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * src[idx(y, clamp(x as isize + j as isize - r, width), c)])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                out[idx(y, x, c)] = k
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * horiz[idx(clamp(y as isize + j as isize - r, height), x, c)])
                    .sum();
            }
        }
    }
    Ok(Tensor::new(frame.shape().to_vec(), out).expect("same shape"))
}

/// Align-corners bilinear resampling to `out_h × out_w`.
fn resample(src: &[f64], dims: ImageDims, out_h: usize, out_w: usize) -> Vec<f64> {
    let scale = |n_in: usize, n_out: usize| if n_out > 1 { (n_in - 1) as f64 / (n_out - 1) as f64 } else { 0.0 };
    let (sy, sx) = (scale(dims.height, out_h), scale(dims.width, out_w));
    let c = dims.channels;
    let mut out = vec![0.0; out_h * out_w * c];
    for y in 0..out_h {
        for x in 0..out_w {
            let p = (y * out_w + x) * c;
            sample_into(src, dims, x as f64 * sx, y as f64 * sy, &mut out[p..p + c]);
        }
    }
    out
}

/// Align-corners bilinear resampling of an `[H, W]` or `[H, W, C]` frame to `out_h × out_w`.
pub fn resample_to(frame: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor, WarpError> {
    let dims = ImageDims::of(frame)?;
    if out_h == 0 || out_w == 0 {
        return Err(WarpError::Degenerate { height: out_h, width: out_w });
    }
    let mut shape = frame.shape().to_vec();
    shape[0] = out_h;
    shape[1] = out_w;
    Ok(Tensor::new(shape, resample(frame.data(), dims, out_h, out_w)).expect("resampled shape"))
}

/// Bilinear downscale to `⌊ratio·H⌋ × ⌊ratio·W⌋` and back up to `H × W`.
pub fn resize(frame: &Tensor, ratio: f64) -> Result<Tensor, WarpError> {
    let dims = ImageDims::of(frame)?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(WarpError::BadRatio(ratio));
    }
    // small slack so e.g. 0.7 * 10 lands on 7
    let shrink = |n: usize| (ratio * n as f64 + 1e-9).floor() as usize;
    let (h, w) = (shrink(dims.height), shrink(dims.width));
    if h < 1 || w < 1 {
        return Err(WarpError::Degenerate { height: h, width: w });
    }
    let small = resample(frame.data(), dims, h, w);
    let small_dims = ImageDims { height: h, width: w, channels: dims.channels };
    let back = resample(&small, small_dims, dims.height, dims.width);
    Ok(Tensor::new(frame.shape().to_vec(), back).expect("same shape"))
}

/// Robustness perturbation applied to every frame of a video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Blur {
        sigma: f64,
    },
    Resize {
        ratio: f64,
    },
    /// Blur followed by resize.
    Mixed {
        sigma: f64,
        ratio: f64,
    },
}

impl Perturbation {
    pub fn apply(&self, frame: &Tensor) -> Result<Tensor, WarpError> {
        match *self {
            Self::Blur { sigma } => gaussian_blur(frame, sigma),
            Self::Resize { ratio } => resize(frame, ratio),
            Self::Mixed { sigma, ratio } => resize(&gaussian_blur(frame, sigma)?, ratio),
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Blur { sigma } => write!(f, "blur:{sigma}"),
            Self::Resize { ratio } => write!(f, "resize:{ratio}"),
            Self::Mixed { sigma, ratio } => write!(f, "mixed:{sigma}:{ratio}"),
        }
    }
}

impl FromStr for Perturbation {
    type Err = String;

    /// `blur:SIGMA`, `resize:RATIO`, `mixed` (σ = 3, ratio 0.7) or `mixed:SIGMA:RATIO`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|e| format!("bad number `{p}` in `{s}`: {e}"));
        let p = match parts.as_slice() {
            ["blur", sigma] => Self::Blur { sigma: num(sigma)? },
            ["resize", ratio] => Self::Resize { ratio: num(ratio)? },
            ["mixed"] => Self::Mixed { sigma: 3.0, ratio: 0.7 },
            ["mixed", sigma, ratio] => Self::Mixed { sigma: num(sigma)?, ratio: num(ratio)? },
            _ => return Err(format!("unknown perturbation `{s}` (blur:S | resize:R | mixed[:S:R])")),
        };
        match p {
            Self::Blur { sigma } | Self::Mixed { sigma, .. } if !(sigma > 0.0) => {
                Err(format!("sigma must be positive in `{s}`"))
            }
            Self::Resize { ratio } | Self::Mixed { ratio, .. } if !(ratio > 0.0 && ratio <= 1.0) => {
                Err(format!("ratio must lie in (0, 1] in `{s}`"))
            }
            ok => Ok(ok),
        }
    }
}

/// Applies `p` frame by frame to a `[T, H, W]` or `[T, H, W, C]` sequence.
pub fn perturb_sequence(seq: &Tensor, p: &Perturbation) -> Result<Tensor, WarpError> {
    if !(3..=4).contains(&seq.rank()) {
        return Err(WarpError::NotASequence(seq.shape().to_vec()));
    }
    let frames: Vec<Tensor> = (0..seq.shape()[0]).map(|t| p.apply(&seq.outer_tensor(t))).collect::<Result<_, _>>()?;
    Ok(Tensor::stack(&frames).expect("uniform frame shapes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn blur_preserves_constant_image() {
        let img = Tensor::full(vec![10, 12, 3], 0.37).unwrap();
        let out = gaussian_blur(&img, 3.0).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn blurred_impulse_center_matches_2d_kernel() {
        let sigma = 3.0;
        let n = 41;
        let mut img = Tensor::zeros(vec![n, n]).unwrap();
        img.data_mut()[(n / 2) * n + n / 2] = 1.0;
        let out = gaussian_blur(&img, sigma).unwrap();

        // direct 2-D kernel over the same square support
        let r = (3.0f64 * sigma).ceil() as i64;
        let mut total = 0.0;
        for i in -r..=r {
            for j in -r..=r {
                total += (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
            }
        }
        let center_weight = 1.0 / total;
        assert!((out.data()[(n / 2) * n + n / 2] - center_weight).abs() < 1e-12);
    }

    #[test]
    fn kernel_radius_and_errors() {
        assert_eq!(gaussian_kernel(3.0).unwrap().len(), 19);
        assert_eq!(gaussian_kernel(0.5).unwrap().len(), 5);
        assert_eq!(gaussian_kernel(0.0), Err(WarpError::BadSigma(0.0)));
    }

    #[test]
    fn resize_ratio_one_is_identity() {
        let mut rng = substream(3, "resize");
        let img = Tensor::from_fn(vec![9, 13, 3], |_| rng.random::<f64>()).unwrap();
        let out = resize(&img, 1.0).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_keeps_shape_and_rejects_degenerate() {
        let img = Tensor::zeros(vec![10, 10]).unwrap();
        assert_eq!(resize(&img, 0.7).unwrap().shape(), &[10, 10]);
        assert!(matches!(resize(&img, 0.05), Err(WarpError::Degenerate { .. })));
        assert!(matches!(resize(&img, 1.5), Err(WarpError::BadRatio(_))));
    }

    #[test]
    fn parse_perturbations() {
        assert_eq!("blur:3".parse::<Perturbation>().unwrap(), Perturbation::Blur { sigma: 3.0 });
        assert_eq!("resize:0.7".parse::<Perturbation>().unwrap(), Perturbation::Resize { ratio: 0.7 });
        assert_eq!("mixed".parse::<Perturbation>().unwrap(), Perturbation::Mixed { sigma: 3.0, ratio: 0.7 });
        assert!("jpeg:90".parse::<Perturbation>().is_err());
        assert!("blur:-1".parse::<Perturbation>().is_err());
        let p = Perturbation::Mixed { sigma: 2.0, ratio: 0.5 };
        assert_eq!(p.to_string().parse::<Perturbation>().unwrap(), p);
    }

    proptest! {
        #[test]
        fn perturbations_stay_in_input_range(
            values in prop::collection::vec(-3.0f64..3.0, 8 * 7),
            sigma in 0.3f64..4.0,
            ratio in 0.2f64..=1.0,
        ) {
            let img = Tensor::new(vec![8, 7], values).unwrap();
            let (lo, hi) = img.min_max();
            for out in [gaussian_blur(&img, sigma).unwrap(), resize(&img, ratio).unwrap()] {
                let (olo, ohi) = out.min_max();
                prop_assert!(olo >= lo - 1e-12 && ohi <= hi + 1e-12);
            }
        }
    }
}
