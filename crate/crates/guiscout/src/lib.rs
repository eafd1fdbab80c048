//! guiscout: search a repository of app screenshots by text, classify
//! screens zero-shot, and drive UI generation pipelines against external
//! model endpoints.
//!
//! The pure retrieval machinery lives in [`guiscout_core`]; this crate adds
//! everything that touches the outside world.

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod embedder;
pub mod genkit;
pub mod http_util;
pub mod ingest;
pub mod manifest;
pub mod mock;
pub mod service;
pub mod store;
pub mod synth;

pub use guiscout_core as core;
