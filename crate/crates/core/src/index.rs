use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::CoreError;
use crate::flat::FlatIndex;
use crate::hit::RankedHit;
use crate::hnsw::{HnswIndex, HnswParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Flat,
    Hnsw,
}

impl IndexKind {
    pub fn code(self) -> u8 {
        match self {
            IndexKind::Flat => 0,
            IndexKind::Hnsw => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Flat => "flat",
            IndexKind::Hnsw => "hnsw",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(IndexKind::Flat),
            "hnsw" => Ok(IndexKind::Hnsw),
            other => Err(CoreError::InvalidConfig(format!("unknown index kind `{other}`"))),
        }
    }
}

/// Either index behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorIndex {
    Flat(FlatIndex),
    Hnsw(HnswIndex),
}

macro_rules! dispatch {
    ($self:expr, $ix:ident => $body:expr) => {
        match $self {
            VectorIndex::Flat($ix) => $body,
            VectorIndex::Hnsw($ix) => $body,
        }
    };
}

impl VectorIndex {
    pub fn new(kind: IndexKind, dim: usize, seed: u64, params: HnswParams) -> Result<Self, CoreError> {
        Ok(match kind {
            IndexKind::Flat => VectorIndex::Flat(FlatIndex::with_seed(dim, seed)),
            IndexKind::Hnsw => VectorIndex::Hnsw(HnswIndex::new(dim, params, seed)?),
        })
    }

    pub fn kind(&self) -> IndexKind {
        match self {
            VectorIndex::Flat(_) => IndexKind::Flat,
            VectorIndex::Hnsw(_) => IndexKind::Hnsw,
        }
    }

    pub fn dim(&self) -> usize {
        dispatch!(self, ix => ix.dim())
    }

    pub fn seed(&self) -> u64 {
        dispatch!(self, ix => ix.seed())
    }

    pub fn len(&self) -> usize {
        dispatch!(self, ix => ix.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: &str) -> bool {
        dispatch!(self, ix => ix.contains(id))
    }

    pub fn insert(&mut self, id: &str, e: &Embedding) -> Result<(), CoreError> {
        dispatch!(self, ix => ix.insert(id, e))
    }

    pub fn remove(&mut self, id: &str) -> bool {
        dispatch!(self, ix => ix.remove(id))
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        dispatch!(self, ix => ix.vector(id))
    }

    /// Top-k: exact for flat, approximate for HNSW.
    pub fn search(&self, q: &Embedding, k: usize) -> Result<Vec<RankedHit>, CoreError> {
        dispatch!(self, ix => ix.search(q, k))
    }

    /// Exact top-k restricted to ids accepted by `keep`.
    pub fn search_where(
        &self,
        q: &Embedding,
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<RankedHit>, CoreError> {
        dispatch!(self, ix => ix.search_where(q, k, keep))
    }

    pub fn compact(&self) -> VectorIndex {
        match self {
            VectorIndex::Flat(ix) => VectorIndex::Flat(ix.compact()),
            VectorIndex::Hnsw(ix) => VectorIndex::Hnsw(ix.compact()),
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = (&str, &[f32])> + '_> {
        dispatch!(self, ix => Box::new(ix.iter()))
    }
}
