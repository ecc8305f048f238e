//! Numeric containers, the `FVT1` on-disk tensor format and cohort manifests.

mod format;
mod manifest;
mod sequences;
mod tensor;

pub use format::{decode_tensor, encode_tensor, read_tensor, read_tensor_shape, write_tensor, TensorIoError, MAGIC};
pub use manifest::{
    load_cohort, load_manifest, save_manifest, ArtifactKind, Artifacts, ManifestError, VideoManifest, MANIFEST_DIR,
};
pub use sequences::{DepthSequence, EmbeddingSequence, FlowField, FrameSequence, SequenceError, TokenFeatures};
pub use tensor::{Tensor, TensorError};
