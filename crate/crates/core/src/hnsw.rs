//! Hierarchical navigable small world graph for approximate top-k.
//!
//! Nodes draw a top layer `floor(-ln(u) · level_mult)` from a seeded
//! SplitMix64 stream. Insertion descends greedily from the entry point, then
//! runs a beam search of width `ef_construction` on every layer the node
//! lives on, linking it to neighbors picked by the diversity heuristic
//! (pruned candidates back-fill empty slots). Degree is capped at `2·M` on
//! layer 0 and `M` above.
//!
//! Build is sequential, so a given seed and insertion order always yield
//! the same graph. Search takes `&self` and allocates its own visited set,
//! so any number of searches can run concurrently.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::embedding::{dot_f32_f32, dot_f32_f64, Embedding};
use crate::error::CoreError;
use crate::hit::{RankedHit, TopK};
use crate::rng::SplitMix64;

/// Upper bound on drawn levels.
pub const MAX_LEVEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub level_mult: f64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams::with_m(16)
    }
}

impl HnswParams {
    /// `M` with `ef_construction = 200`, `ef_search = 100`, `level_mult = 1/ln M`.
    pub fn with_m(m: usize) -> Self {
        HnswParams {
            m,
            ef_construction: 200,
            ef_search: 100,
            level_mult: 1.0 / libm::log(m.max(2) as f64),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.m < 2 || self.m > u16::MAX as usize {
            return Err(CoreError::InvalidConfig("HNSW M must be in [2, 65535]".into()));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(CoreError::InvalidConfig("HNSW ef values must be positive".into()));
        }
        if !(self.level_mult.is_finite() && self.level_mult > 0.0) {
            return Err(CoreError::InvalidConfig("HNSW level multiplier must be positive".into()));
        }
        Ok(())
    }

    pub fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f64,
    node: u32,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scored {}
impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scored {
    // Greater = better: higher score, then lower node ordinal.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct Visited {
    bits: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            bits: vec![0; n.div_ceil(64)],
        }
    }

    /// Returns true when `node` was not yet marked.
    #[inline]
    fn insert(&mut self, node: u32) -> bool {
        let (w, b) = ((node / 64) as usize, node % 64);
        let fresh = self.bits[w] & (1 << b) == 0;
        self.bits[w] |= 1 << b;
        fresh
    }

    fn clear(&mut self) {
        self.bits.iter_mut().for_each(|w| *w = 0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    pub(crate) dim: usize,
    pub(crate) params: HnswParams,
    pub(crate) seed: u64,
    pub(crate) rng: SplitMix64,
    pub(crate) ids: Vec<String>,
    pub(crate) vectors: Vec<f32>,
    pub(crate) dead: Vec<bool>,
    pub(crate) live: BTreeMap<String, u32>,
    /// `links[node][layer]` lists neighbor ordinals.
    pub(crate) links: Vec<Vec<Vec<u32>>>,
    pub(crate) entry: Option<u32>,
    pub(crate) max_level: usize,
}

impl HnswIndex {
    pub fn new(dim: usize, params: HnswParams, seed: u64) -> Result<Self, CoreError> {
        params.validate()?;
        Ok(HnswIndex {
            dim,
            params,
            seed,
            rng: SplitMix64::new(seed),
            ids: Vec::new(),
            vectors: Vec::new(),
            dead: Vec::new(),
            live: BTreeMap::new(),
            links: Vec::new(),
            entry: None,
            max_level: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_ef_search(&mut self, ef: usize) {
        self.params.ef_search = ef.max(1);
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.ids.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.live.contains_key(id)
    }

    pub fn entry_point(&self) -> Option<u32> {
        self.entry
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn neighbors(&self, node: u32, layer: usize) -> &[u32] {
        self.links[node as usize]
            .get(layer)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn node_level(&self, node: u32) -> usize {
        self.links[node as usize].len() - 1
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.live.get(id).map(|&n| self.node_vector(n))
    }

    #[inline]
    fn node_vector(&self, node: u32) -> &[f32] {
        let s = node as usize * self.dim;
        &self.vectors[s..s + self.dim]
    }

    fn draw_level(&mut self) -> usize {
        let u = 1.0 - self.rng.next_f64();
        let level = libm::floor(-libm::log(u) * self.params.level_mult);
        (level as usize).min(MAX_LEVEL)
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
        let node = self.ids.len() as u32;
        let level = self.draw_level();
        self.ids.push(id.into());
        self.vectors.extend_from_slice(v);
        self.dead.push(false);
        self.live.insert(id.into(), node);
        self.links.push(vec![Vec::new(); level + 1]);

        let Some(entry) = self.entry else {
            self.entry = Some(node);
            self.max_level = level;
            return Ok(());
        };

        let query: Vec<f32> = v.to_vec();
        let score = |this: &Self, n: u32| dot_f32_f32(this.node_vector(n), &query);
        let mut visited = Visited::new(self.ids.len());
        let mut eps = vec![Scored {
            score: score(self, entry),
            node: entry,
        }];
        for layer in (level + 1..=self.max_level).rev() {
            visited.clear();
            eps = self.search_layer(&eps, 1, layer, &mut visited, |n| score(self, n));
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            visited.clear();
            let found = self.search_layer(&eps, self.params.ef_construction, layer, &mut visited, |n| {
                score(self, n)
            });
            let chosen = self.select_neighbors(&found, self.params.m);
            self.links[node as usize][layer] = chosen.iter().map(|s| s.node).collect();
            let cap = self.params.max_degree(layer);
            for s in &chosen {
                self.link(s.node, node, layer, cap);
            }
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node);
        }
        Ok(())
    }

    /// Add `to` to `from`'s list on `layer`, re-pruning when over capacity.
    fn link(&mut self, from: u32, to: u32, layer: usize, cap: usize) {
        let list = &mut self.links[from as usize][layer];
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = self.node_vector(from);
        let mut cands: Vec<Scored> = self.links[from as usize][layer]
            .iter()
            .map(|&n| Scored {
                score: dot_f32_f32(self.node_vector(n), base),
                node: n,
            })
            .collect();
        cands.sort_unstable_by(|a, b| b.cmp(a));
        let kept = self.select_neighbors(&cands, cap);
        self.links[from as usize][layer] = kept.iter().map(|s| s.node).collect();
    }

    /// Diversity heuristic over candidates sorted best-first: keep a
    /// candidate only if it is closer to the base than to every kept one,
    /// then back-fill with the pruned ones up to `m`.
    fn select_neighbors(&self, sorted: &[Scored], m: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(m);
        let mut pruned: Vec<Scored> = Vec::new();
        for &c in sorted {
            if kept.len() >= m {
                break;
            }
            let cv = self.node_vector(c.node);
            let diverse = kept
                .iter()
                .all(|k| dot_f32_f32(cv, self.node_vector(k.node)) < c.score);
            if diverse {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        for c in pruned {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept
    }

    /// Beam search on one layer; returns up to `ef` nodes, best first.
    fn search_layer(
        &self,
        entry_points: &[Scored],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
        score: impl Fn(u32) -> f64,
    ) -> Vec<Scored> {
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.insert(ep.node) {
                candidates.push(ep);
                results.push(Reverse(ep));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        while let Some(c) = candidates.pop() {
            let worst = results.peek().map(|r| r.0);
            if let Some(w) = worst {
                if c < w && results.len() >= ef {
                    break;
                }
            }
            for &n in self.neighbors(c.node, layer) {
                if !visited.insert(n) {
                    continue;
                }
                let s = Scored { score: score(n), node: n };
                let admit = results.len() < ef || results.peek().is_some_and(|w| s > w.0);
                if admit {
                    candidates.push(s);
                    results.push(Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// Approximate top-k with beam width `max(ef_search, k)`.
    pub fn search(&self, q: &Embedding, k: usize) -> Result<Vec<RankedHit>, CoreError> {
        self.search_ef(q, k, self.params.ef_search.max(k))
    }

    pub fn search_ef(&self, q: &Embedding, k: usize, ef: usize) -> Result<Vec<RankedHit>, CoreError> {
        q.check_dim(self.dim)?;
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        if k == 0 || self.live.is_empty() {
            return Ok(Vec::new());
        }
        let query = q.values();
        let score = |n: u32| dot_f32_f64(self.node_vector(n), query);
        let mut visited = Visited::new(self.ids.len());
        let mut eps = vec![Scored {
            score: score(entry),
            node: entry,
        }];
        for layer in (1..=self.max_level).rev() {
            visited.clear();
            eps = self.search_layer(&eps, 1, layer, &mut visited, score);
        }
        visited.clear();
        let found = self.search_layer(&eps, ef.max(k), 0, &mut visited, score);
        let mut top = TopK::new(k);
        for s in &found {
            if !self.dead[s.node as usize] {
                top.push(s.score, &self.ids[s.node as usize]);
            }
        }
        Ok(top.into_hits())
    }

    /// Exact scan over live nodes accepted by `keep`.
    pub fn search_where(
        &self,
        q: &Embedding,
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Vec<RankedHit>, CoreError> {
        q.check_dim(self.dim)?;
        let query = q.values();
        let mut top = TopK::new(k);
        for (node, id) in self.ids.iter().enumerate() {
            if self.dead[node] || !keep(id) {
                continue;
            }
            top.push(dot_f32_f64(self.node_vector(node as u32), query), id);
        }
        Ok(top.into_hits())
    }

    /// Tombstone `id`. The node stays in the graph as a waypoint.
    pub fn remove(&mut self, id: &str) -> bool {
        match self.live.remove(id) {
            Some(n) => {
                self.dead[n as usize] = true;
                true
            }
            None => false,
        }
    }

    /// Rebuild from live nodes in insertion order with the original seed.
    pub fn compact(&self) -> HnswIndex {
        let mut out = HnswIndex::new(self.dim, self.params, self.seed).expect("params already validated");
        for (node, id) in self.ids.iter().enumerate() {
            if !self.dead[node] {
                out.insert_raw(id, self.node_vector(node as u32))
                    .expect("live ids are unique");
            }
        }
        out
    }

    /// Number of nodes reachable from the entry point over layer-0 links.
    pub fn reachable_from_entry(&self) -> usize {
        let Some(entry) = self.entry else { return 0 };
        let mut visited = Visited::new(self.ids.len());
        visited.insert(entry);
        let mut stack = vec![entry];
        let mut count = 1;
        while let Some(n) = stack.pop() {
            for &m in self.neighbors(n, 0) {
                if visited.insert(m) {
                    count += 1;
                    stack.push(m);
                }
            }
        }
        count
    }

    /// Live `(id, vector)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        (0..self.ids.len())
            .filter(|&n| !self.dead[n])
            .map(|n| (self.ids[n].as_str(), self.node_vector(n as u32)))
    }
}
