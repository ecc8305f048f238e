//! Backward warping and the warping-error metric.
//!
//! Flow is a backward correspondence on the target grid: target pixel `p`
//! takes the source value at `p + flow(p)`. Samples outside the image clamp
//! to the nearest edge pixel.

mod perturb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_io::Tensor;

pub use perturb::{gaussian_blur, gaussian_kernel, perturb_sequence, resample_to, resize, Perturbation};

#[derive(Debug, Error, PartialEq)]
pub enum WarpError {
    #[error("expected an image of shape [H, W] or [H, W, C], got {0:?}")]
    NotAnImage(Vec<usize>),
    #[error("expected a sequence of shape [T, H, W] or [T, H, W, C], got {0:?}")]
    NotASequence(Vec<usize>),
    #[error("flow shape {flow:?} does not match {expected:?}")]
    FlowShape { flow: Vec<usize>, expected: Vec<usize> },
    #[error("warping error needs at least 2 frames, got {0}")]
    TooShort(usize),
    #[error("border crop of {border} leaves no pixels in a {height}x{width} frame")]
    EmptyCrop { border: usize, height: usize, width: usize },
    #[error("blur sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("resize ratio must lie in (0, 1], got {0}")]
    BadRatio(f64),
    #[error("resize to {height}x{width} is degenerate")]
    Degenerate { height: usize, width: usize },
}

/// Dimensions of a single image tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ImageDims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageDims {
    pub fn of(t: &Tensor) -> Result<Self, WarpError> {
        match *t.shape() {
            [height, width] => Ok(Self { height, width, channels: 1 }),
            [height, width, channels] => Ok(Self { height, width, channels }),
            _ => Err(WarpError::NotAnImage(t.shape().to_vec())),
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Bilinear sample of a row-major `[H, W, C]` buffer into `out` (length C).
#[inline]
pub(crate) fn sample_into(data: &[f64], dims: ImageDims, x: f64, y: f64, out: &mut [f64]) {
    let ImageDims { height, width, channels } = dims;
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |yy: usize, xx: usize, c: usize| data[(yy * width + xx) * channels + c];
    for (c, o) in out.iter_mut().enumerate() {
        let (a, b) = (at(y0, x0, c), at(y0, x1, c));
        let (d, e) = (at(y1, x0, c), at(y1, x1, c));
        // lerp form keeps constant neighborhoods exact
        let top = a + (b - a) * fx;
        let bottom = d + (e - d) * fx;
        *o = top + (bottom - top) * fy;
    }
}

/// Bilinear interpolation of `field` (`[H, W]` or `[H, W, C]`) at `(x, y)`,
/// `x` along width. One value per channel.
pub fn bilinear_sample(field: &Tensor, x: f64, y: f64) -> Result<Vec<f64>, WarpError> {
    let dims = ImageDims::of(field)?;
    let mut out = vec![0.0; dims.channels];
    sample_into(field.data(), dims, x, y, &mut out);
    Ok(out)
}

fn warp_into(source: &[f64], dims: ImageDims, flow: &[f64], out: &mut [f64]) {
    let c = dims.channels;
    for y in 0..dims.height {
        for x in 0..dims.width {
            let p = y * dims.width + x;
            let (dx, dy) = (flow[2 * p], flow[2 * p + 1]);
            sample_into(source, dims, x as f64 + dx, y as f64 + dy, &mut out[p * c..(p + 1) * c]);
        }
    }
}

/// Backward-warps `source` with `flow` (`[H, W, 2]`).
pub fn warp(source: &Tensor, flow: &Tensor) -> Result<Tensor, WarpError> {
    let dims = ImageDims::of(source)?;
    let expected = vec![dims.height, dims.width, 2];
    if flow.shape() != expected.as_slice() {
        return Err(WarpError::FlowShape { flow: flow.shape().to_vec(), expected });
    }
    let mut out = vec![0.0; source.len()];
    warp_into(source.data(), dims, flow.data(), &mut out);
    Ok(Tensor::new(source.shape().to_vec(), out).expect("same shape as source"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpOptions {
    /// Pixels excluded at each image edge when averaging.
    pub border: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpErrorReport {
    /// Mean squared difference for each consecutive pair.
    pub per_pair: Vec<f64>,
    /// Mean of `per_pair`.
    pub total: f64,
}

/// Warping error of a `[T, H, W]` or `[T, H, W, C]` sequence under backward
/// flows `[T−1, H, W, 2]`.
pub fn warping_error(seq: &Tensor, flows: &Tensor, opts: WarpOptions) -> Result<WarpErrorReport, WarpError> {
    let (frames, dims) = match *seq.shape() {
        [t, height, width] => (t, ImageDims { height, width, channels: 1 }),
        [t, height, width, channels] => (t, ImageDims { height, width, channels }),
        _ => return Err(WarpError::NotASequence(seq.shape().to_vec())),
    };
    if frames < 2 {
        return Err(WarpError::TooShort(frames));
    }
    let expected = vec![frames - 1, dims.height, dims.width, 2];
    if flows.shape() != expected.as_slice() {
        return Err(WarpError::FlowShape { flow: flows.shape().to_vec(), expected });
    }
    let b = opts.border;
    if 2 * b >= dims.height || 2 * b >= dims.width {
        return Err(WarpError::EmptyCrop { border: b, height: dims.height, width: dims.width });
    }

    let frame_len = dims.pixels() * dims.channels;
    let counted = ((dims.height - 2 * b) * (dims.width - 2 * b) * dims.channels) as f64;
    let mut warped = vec![0.0; frame_len];
    let mut per_pair = Vec::with_capacity(frames - 1);
    for t in 0..frames - 1 {
        let source = seq.outer(t);
        let target = seq.outer(t + 1);
        warp_into(source, dims, flows.outer(t), &mut warped);
        let mut sum = 0.0;
        for y in b..dims.height - b {
            let row = (y * dims.width + b) * dims.channels..(y * dims.width + dims.width - b) * dims.channels;
            sum += warped[row.clone()].iter().zip(&target[row]).map(|(w, t)| (w - t) * (w - t)).sum::<f64>();
        }
        per_pair.push(sum / counted);
    }
    let total = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
    Ok(WarpErrorReport { per_pair, total })
}
