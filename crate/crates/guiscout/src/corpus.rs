//! On-disk layout of an indexed repository.
//!
//! ```text
//! <index dir>/
//!   corpus.json       repository config: dim, seed, index kind, embedder, image root
//!   index.gsix        vector index (see guiscout_core::codec)
//!   records.jsonl     metadata log      } see store
//!   records.offsets   id → offset table }
//! ```

use std::io;
use std::path::{Path, PathBuf};

use guiscout_core::{codec, CoreError, HnswParams, IndexKind, VectorIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedder::EmbedderDescriptor;
use crate::store::{MetadataStore, StoreError};

pub const META_FILE: &str = "corpus.json";
pub const INDEX_FILE: &str = "index.gsix";
pub const META_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("index directory {0} does not exist or holds no index")]
    Missing(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad {META_FILE}: {0}")]
    Meta(String),
    #[error(transparent)]
    Index(#[from] CoreError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnswSettings {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
}

impl From<HnswParams> for HnswSettings {
    fn from(p: HnswParams) -> Self {
        HnswSettings {
            m: p.m,
            ef_construction: p.ef_construction,
            ef_search: p.ef_search,
        }
    }
}

impl From<HnswSettings> for HnswParams {
    fn from(s: HnswSettings) -> Self {
        HnswParams {
            ef_construction: s.ef_construction,
            ef_search: s.ef_search,
            ..HnswParams::with_m(s.m)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub version: u32,
    pub dim: usize,
    pub seed: u64,
    pub kind: IndexKind,
    pub hnsw: HnswSettings,
    pub embedder: EmbedderDescriptor,
    /// Directory image paths are relative to.
    pub image_root: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_threshold: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

impl CorpusMeta {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let path = dir.join(META_FILE);
        if !path.is_file() {
            return Err(CorpusError::Missing(dir.to_path_buf()));
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let meta: CorpusMeta = serde_json::from_str(&text).map_err(|e| CorpusError::Meta(e.to_string()))?;
        if meta.version != META_VERSION {
            return Err(CorpusError::Meta(format!("unsupported version {}", meta.version)));
        }
        Ok(meta)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        let mut text = serde_json::to_string_pretty(self).expect("meta serializes");
        text.push('\n');
        write_atomic(&dir.join(META_FILE), text.as_bytes())
    }
}

pub fn save_index(dir: &Path, index: &VectorIndex) -> Result<(), CorpusError> {
    write_atomic(&dir.join(INDEX_FILE), &codec::encode(index))
}

pub fn load_index(path: &Path, expected_dim: Option<usize>) -> Result<VectorIndex, CorpusError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(codec::decode(&bytes, expected_dim)?)
}

/// Everything needed to answer queries against one index directory.
pub struct Corpus {
    pub dir: PathBuf,
    pub meta: CorpusMeta,
    pub index: VectorIndex,
    pub store: MetadataStore,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self, CorpusError> {
        if !dir.is_dir() {
            return Err(CorpusError::Missing(dir.to_path_buf()));
        }
        let meta = CorpusMeta::load(dir)?;
        let index = load_index(&dir.join(INDEX_FILE), Some(meta.dim))?;
        if index.kind() != meta.kind {
            return Err(CorpusError::Meta(format!(
                "{META_FILE} says {} but {INDEX_FILE} holds a {} index",
                meta.kind,
                index.kind()
            )));
        }
        let store = MetadataStore::open(dir)?;
        Ok(Corpus {
            dir: dir.to_path_buf(),
            meta,
            index,
            store,
        })
    }

    /// Persist the index, the offset table and the config.
    pub fn save(&self) -> Result<(), CorpusError> {
        save_index(&self.dir, &self.index)?;
        self.store.write_offsets()?;
        self.meta.save(&self.dir)
    }

    pub fn resolve_image(&self, image_path: &str) -> PathBuf {
        self.meta.image_root.join(image_path)
    }
}
