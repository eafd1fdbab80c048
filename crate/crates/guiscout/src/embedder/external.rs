use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use guiscout_core::{Embedding, DEFAULT_BATCH};
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{read_image_bytes, validate_texts, EmbedError, Embedder, EmbedderDescriptor, ImageInput, Modality};
use crate::http_util::{agent, get_json, join, post_json};

#[derive(Debug, Deserialize)]
struct InfoReply {
    name: String,
    dim: usize,
    modality: Modality,
}

#[derive(Debug, Serialize)]
pub(crate) struct EmbedRequest<'a> {
    pub modality: Modality,
    pub items: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding model served over HTTP.
#[derive(Clone)]
pub struct ExternalEmbedder {
    base: String,
    agent: Agent,
    descriptor: EmbedderDescriptor,
    batch: usize,
}

/// Handshake with `endpoint` and check its dimension against the repository.
pub fn attach_external(endpoint: &str, expected_dim: usize) -> Result<ExternalEmbedder, EmbedError> {
    let agent = agent(Duration::from_secs(120));
    let info: InfoReply = get_json(&agent, &join(endpoint, "info")).map_err(EmbedError::HandshakeFailure)?;
    if info.dim != expected_dim {
        return Err(EmbedError::DimensionMismatch {
            expected: expected_dim,
            actual: info.dim,
        });
    }
    Ok(ExternalEmbedder {
        base: endpoint.to_string(),
        agent,
        descriptor: EmbedderDescriptor {
            name: info.name,
            dim: info.dim,
            modality: info.modality,
            deterministic: false,
        },
        batch: DEFAULT_BATCH,
    })
}

impl ExternalEmbedder {
    /// Items per `POST /embed` call.
    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch.max(1);
        self
    }

    fn call(&self, modality: Modality, items: &[String], indices: &[usize]) -> Result<Vec<Embedding>, EmbedError> {
        let fail = |reason: String| EmbedError::UpstreamFailure {
            indices: indices.to_vec(),
            reason,
        };
        let reply: EmbedReply = post_json(&self.agent, &join(&self.base, "embed"), &EmbedRequest { modality, items })
            .map_err(fail)?;
        if reply.vectors.len() != items.len() {
            return Err(fail(format!(
                "expected {} vectors, got {}",
                items.len(),
                reply.vectors.len()
            )));
        }
        reply
            .vectors
            .into_iter()
            .map(|v| Embedding::normalize(&v, self.descriptor.dim).map_err(|e| fail(e.to_string())))
            .collect()
    }
}

impl Embedder for ExternalEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed_text(&self, batch: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        validate_texts(batch)?;
        if !self.descriptor.modality.supports_text() {
            return Err(EmbedError::Unsupported {
                name: self.descriptor.name.clone(),
                what: "text",
            });
        }
        let mut out = Vec::with_capacity(batch.len());
        for (c, chunk) in batch.chunks(self.batch).enumerate() {
            let indices: Vec<usize> = (c * self.batch..c * self.batch + chunk.len()).collect();
            out.extend(self.call(Modality::Text, chunk, &indices)?);
        }
        Ok(out)
    }

    fn embed_images(&self, batch: &[ImageInput]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError> {
        if !self.descriptor.modality.supports_image() {
            return Err(EmbedError::Unsupported {
                name: self.descriptor.name.clone(),
                what: "image",
            });
        }
        let mut out: Vec<Option<Result<Embedding, EmbedError>>> = vec![None; batch.len()];
        let mut pending: Vec<(usize, String)> = Vec::new();
        for (i, input) in batch.iter().enumerate() {
            match read_image_bytes(input, i) {
                Ok(bytes) => pending.push((i, B64.encode(bytes))),
                Err(e) => out[i] = Some(Err(e)),
            }
        }
        for chunk in pending.chunks(self.batch) {
            let indices: Vec<usize> = chunk.iter().map(|(i, _)| *i).collect();
            let items: Vec<String> = chunk.iter().map(|(_, b)| b.clone()).collect();
            match self.call(Modality::Image, &items, &indices) {
                Ok(vectors) => {
                    for (&i, v) in indices.iter().zip(vectors) {
                        out[i] = Some(Ok(v));
                    }
                }
                Err(e) => {
                    for &i in &indices {
                        out[i] = Some(Err(e.clone()));
                    }
                }
            }
        }
        Ok(out.into_iter().map(|r| r.expect("every item resolved")).collect())
    }
}
