use forgescore_core::tensor_io::{ArtifactKind, FrameSequence};
use forgescore_core::warp::resample_to;
use forgescore_core::{Tensor, VideoManifest};
use serde::Serialize;

use crate::ReviewError;

pub const THUMB_SIZE: usize = 64;

/// Grayscale frame preview as 0–255 integers, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thumbnail {
    pub video_id: String,
    pub frame: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Channel mean, align-corners bilinear resample to 64×64, then
/// `⌊255·v + 0.5⌋` (halves round up).
pub fn thumbnail(video: &VideoManifest, frame: usize) -> Result<Thumbnail, ReviewError> {
    let missing = || ReviewError::MissingFrame { video_id: video.video_id.clone(), frame };
    let raw = video.load(ArtifactKind::Frames)?.ok_or_else(missing)?;
    let seq = FrameSequence::new(raw).map_err(|_| missing())?;
    if frame >= seq.frames() {
        return Err(missing());
    }
    let (h, w, c) = seq.frame_dims();
    let rgb = seq.frame(frame);
    let gray: Vec<f64> = rgb.data().chunks_exact(c).map(|px| px.iter().sum::<f64>() / c as f64).collect();
    let gray = Tensor::new(vec![h, w], gray).expect("gray shape");
    let small = resample_to(&gray, THUMB_SIZE, THUMB_SIZE).map_err(|_| missing())?;
    let pixels = small.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8).collect();
    Ok(Thumbnail { video_id: video.video_id.clone(), frame, width: THUMB_SIZE, height: THUMB_SIZE, pixels })
}
