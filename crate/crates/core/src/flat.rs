//! Exact top-k by linear scan; the ground truth for every other index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::embedding::{dot_f32_f64, Embedding};
use crate::error::CoreError;
use crate::hit::{RankedHit, TopK};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    dim: usize,
    seed: u64,
    ids: Vec<String>,
    vectors: Vec<f32>,
    dead: Vec<bool>,
    live: BTreeMap<String, u32>,
}

impl FlatIndex {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, 0)
    }

    /// The seed is not used by exact search; it is recorded in saved files.
    pub fn with_seed(dim: usize, seed: u64) -> Self {
        FlatIndex {
            dim,
            seed,
            ids: Vec::new(),
            vectors: Vec::new(),
            dead: Vec::new(),
            live: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Live (searchable) entries.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Stored slots, including tombstoned ones.
    pub fn slot_count(&self) -> usize {
        self.ids.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.live.contains_key(id)
    }

    pub fn insert(&mut self, id: &str, e: &Embedding) -> Result<(), CoreError> {
        e.check_dim(self.dim)?;
        self.insert_raw(id, &e.to_f32())
    }

    pub(crate) fn insert_raw(&mut self, id: &str, v: &[f32]) -> Result<(), CoreError> {
        if self.live.contains_key(id) {
            return Err(CoreError::DuplicateId(id.into()));
        }
        if self.ids.len() >= u32::MAX as usize {
            return Err(CoreError::InvalidConfig("index is full".into()));
        }
        let slot = self.ids.len() as u32;
        self.ids.push(id.into());
        self.vectors.extend_from_slice(v);
        self.dead.push(false);
        self.live.insert(id.into(), slot);
        Ok(())
    }

    /// Tombstone `id`; returns whether it was live.
    pub fn remove(&mut self, id: &str) -> bool {
        match self.live.remove(id) {
            Some(slot) => {
                self.dead[slot as usize] = true;
                true
            }
            None => false,
        }
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.live.get(id).map(|&s| self.slot_vector(s as usize))
    }

    pub(crate) fn slot_vector(&self, slot: usize) -> &[f32] {
        &self.vectors[slot * self.dim..(slot + 1) * self.dim]
    }

    pub(crate) fn slot_id(&self, slot: usize) -> &str {
        &self.ids[slot]
    }

    pub(crate) fn tombstones(&self) -> impl Iterator<Item = usize> + '_ {
        self.dead.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| i)
    }

    /// Append a slot while decoding; dead slots never enter the live map.
    pub(crate) fn push_slot(&mut self, id: String, v: &[f32], dead: bool) -> Result<(), CoreError> {
        if !dead {
            if self.live.contains_key(&id) {
                return Err(CoreError::CorruptFile(format!("duplicate live id `{id}`")));
            }
            self.live.insert(id.clone(), self.ids.len() as u32);
        }
        self.ids.push(id);
        self.vectors.extend_from_slice(v);
        self.dead.push(dead);
        Ok(())
    }

    pub fn search(&self, q: &Embedding, k: usize) -> Result<Vec<RankedHit>, CoreError> {
        self.search_where(q, k, |_| true)
    }

    /// Exact top-k among live entries whose id satisfies `keep`.
    pub fn search_where(
        &self,
        q: &Embedding,
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<RankedHit>, CoreError> {
        q.check_dim(self.dim)?;
        let query = q.values();
        let mut top = TopK::new(k);
        for (slot, v) in self.vectors.chunks_exact(self.dim.max(1)).enumerate() {
            if self.dead[slot] {
                continue;
            }
            let id = self.ids[slot].as_str();
            if !keep(id) {
                continue;
            }
            top.push(dot_f32_f64(v, query), id);
        }
        Ok(top.into_hits())
    }

    /// Drop tombstoned slots.
    pub fn compact(&self) -> FlatIndex {
        let mut out = FlatIndex::with_seed(self.dim, self.seed);
        for slot in 0..self.ids.len() {
            if !self.dead[slot] {
                out.insert_raw(&self.ids[slot], self.slot_vector(slot))
                    .expect("live ids are unique");
            }
        }
        out
    }

    /// Live `(id, vector)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        (0..self.ids.len())
            .filter(|&s| !self.dead[s])
            .map(|s| (self.ids[s].as_str(), self.slot_vector(s)))
    }
}
