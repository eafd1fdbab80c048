//! Turning texts and images into embeddings.
//!
//! [`ReferenceEmbedder`] implements the deterministic in-process recipe;
//! [`ExternalEmbedder`] speaks the HTTP protocol of a model server:
//!
//! - `GET /info` → `{"name", "dim", "modality"}`
//! - `POST /embed` `{"modality": "text"|"image", "items": [...]}` →
//!   `{"vectors": [[f64; dim], ...]}`; images travel as base64 bytes.

mod external;
mod image_io;
mod reference;

use std::path::PathBuf;

use guiscout_core::Embedding;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{attach_external, ExternalEmbedder};
pub use image_io::{decode_rgb, read_image_bytes};
pub use reference::ReferenceEmbedder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Multimodal,
}

impl Modality {
    pub fn supports_text(self) -> bool {
        matches!(self, Modality::Text | Modality::Multimodal)
    }

    pub fn supports_image(self) -> bool {
        matches!(self, Modality::Image | Modality::Multimodal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderDescriptor {
    pub name: String,
    pub dim: usize,
    pub modality: Modality,
    pub deterministic: bool,
}

/// Where an image comes from.
#[derive(Debug, Clone)]
pub enum ImageInput {
    Path(PathBuf),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("empty input{}", .index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    EmptyInput { index: Option<usize> },
    #[error("cannot decode image at index {index}: {reason}")]
    DecodeFailure { index: usize, reason: String },
    #[error("embedding service failed for items {indices:?}: {reason}")]
    UpstreamFailure { indices: Vec<usize>, reason: String },
    #[error("handshake with embedding service failed: {0}")]
    HandshakeFailure(String),
    #[error("embedder dimension {actual} does not match repository dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedder `{name}` does not support {what} input")]
    Unsupported { name: String, what: &'static str },
}

/// A model that maps texts and images into one embedding space.
///
/// Implementations are shared across request handlers and must tolerate
/// concurrent calls.
pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> &EmbedderDescriptor;

    /// One embedding per text, in input order.
    fn embed_text(&self, batch: &[String]) -> Result<Vec<Embedding>, EmbedError>;

    /// One result per image, in input order. Undecodable images fail
    /// individually; the outer error is reserved for whole-batch failures.
    fn embed_images(&self, batch: &[ImageInput]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError>;

    /// Like [`Embedder::embed_images`] but fails on the first bad item.
    fn embed_image(&self, batch: &[ImageInput]) -> Result<Vec<Embedding>, EmbedError> {
        if batch.is_empty() {
            return Err(EmbedError::EmptyInput { index: None });
        }
        self.embed_images(batch)?.into_iter().collect()
    }
}

pub(crate) fn validate_texts(batch: &[String]) -> Result<(), EmbedError> {
    if batch.is_empty() {
        return Err(EmbedError::EmptyInput { index: None });
    }
    match batch.iter().position(|t| t.trim().is_empty()) {
        Some(i) => Err(EmbedError::EmptyInput { index: Some(i) }),
        None => Ok(()),
    }
}

/// Build the embedder named on the command line: `reference` or an
/// endpoint URL.
pub fn from_endpoint(endpoint: &str, dim: usize, seed: u64) -> Result<Box<dyn Embedder>, EmbedError> {
    if endpoint == "reference" {
        Ok(Box::new(ReferenceEmbedder::new(dim, seed)))
    } else {
        Ok(Box::new(attach_external(endpoint, dim)?))
    }
}
