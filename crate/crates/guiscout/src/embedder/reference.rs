use guiscout_core::reference::ReferenceRecipe;
use guiscout_core::Embedding;

use super::{
    decode_rgb, read_image_bytes, validate_texts, EmbedError, Embedder, EmbedderDescriptor, ImageInput, Modality,
};

/// In-process embedder implementing the deterministic reference recipe.
pub struct ReferenceEmbedder {
    descriptor: EmbedderDescriptor,
    recipe: ReferenceRecipe,
}

impl ReferenceEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        ReferenceEmbedder {
            descriptor: EmbedderDescriptor {
                name: format!("reference-trigram-v1/seed={seed}"),
                dim,
                modality: Modality::Multimodal,
                deterministic: true,
            },
            recipe: ReferenceRecipe::new(dim, seed),
        }
    }

    pub fn recipe(&self) -> &ReferenceRecipe {
        &self.recipe
    }

    pub fn embed_image_bytes(&self, bytes: &[u8], index: usize) -> Result<Embedding, EmbedError> {
        let (w, h, rgb) = decode_rgb(bytes).map_err(|reason| EmbedError::DecodeFailure { index, reason })?;
        self.recipe
            .embed_rgb(w, h, &rgb)
            .map_err(|e| EmbedError::DecodeFailure {
                index,
                reason: e.to_string(),
            })
    }
}

impl Embedder for ReferenceEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed_text(&self, batch: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        validate_texts(batch)?;
        batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.recipe.embed_text(t).map_err(|e| EmbedError::UpstreamFailure {
                    indices: vec![i],
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    fn embed_images(&self, batch: &[ImageInput]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError> {
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, input)| self.embed_image_bytes(&read_image_bytes(input, i)?, i))
            .collect())
    }
}
