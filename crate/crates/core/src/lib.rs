//! Allocation-only core of the guiscout retrieval engine.
//!
//! Everything here is pure computation over in-memory buffers: unit-norm
//! embeddings, the deterministic reference embedder recipe, exact and HNSW
//! vector indexes, the `GSIX` index codec, zero-shot scoring and latency
//! percentiles. File IO, image decoding, HTTP and the CLI live in the
//! `guiscout` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classify;
pub mod codec;
pub mod config;
pub mod embedding;
pub mod error;
pub mod flat;
pub mod hit;
pub mod hnsw;
pub mod index;
pub mod query;
pub mod record;
pub mod reference;
pub mod rng;
pub mod stats;

pub use classify::{softmax, Classification};
pub use config::{GenConfig, DEFAULT_BATCH, DEFAULT_DIM, DEFAULT_K, DEFAULT_SEED};
pub use embedding::{cosine, Embedding};
pub use error::CoreError;
pub use flat::FlatIndex;
pub use hit::RankedHit;
pub use hnsw::{HnswIndex, HnswParams};
pub use index::{IndexKind, VectorIndex};
pub use query::{FilterField, Filters, Query};
pub use record::{Platform, ScreenRecord};
