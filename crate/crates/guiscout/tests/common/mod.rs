#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use guiscout::corpus::Corpus;
use guiscout::embedder::{Embedder, ReferenceEmbedder};
use guiscout::ingest::{ingest, IngestOptions, IngestReport};
use guiscout::service::{Engine, SessionStore};
use guiscout::synth::{write_fixture, FixtureOptions};

pub const DIM: usize = 128;
pub const SEED: u64 = 42;

pub fn embedder() -> ReferenceEmbedder {
    ReferenceEmbedder::new(DIM, SEED)
}

pub fn fixture(dir: &Path, screens: usize, duplicates: usize, missing: usize) -> PathBuf {
    write_fixture(dir, &FixtureOptions { screens, duplicates, missing, dim: DIM, seed: SEED })
        .unwrap()
        .manifest
}

pub fn options() -> IngestOptions {
    IngestOptions { dim: DIM, seed: SEED, ..IngestOptions::default() }
}

/// The standard 20-line fixture ingested into `<root>/index`.
pub fn ingested(root: &Path) -> (Corpus, IngestReport) {
    let manifest = fixture(&root.join("fixture"), 17, 2, 1);
    ingest(&manifest, &root.join("index"), &embedder(), &options()).unwrap()
}

pub fn engine(root: &Path) -> Arc<Engine> {
    ingested(root);
    let e: Arc<dyn Embedder> = Arc::new(embedder());
    Arc::new(Engine::open(&root.join("index"), e).unwrap())
}

pub fn in_memory_engine(dir: &Path) -> Engine {
    Engine::with_sessions(dir, Arc::new(embedder()), SessionStore::in_memory()).unwrap()
}
