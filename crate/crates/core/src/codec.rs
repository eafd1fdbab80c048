//! The `GSIX` index file format.
//!
//! ```text
//! magic "GSIX" | version u16 | kind u8 (0 flat, 1 hnsw) | dim u32 | count u64 | seed u64
//! params block: len u32, then
//!     flat: tombstone_count u64, tombstone slots u64...
//!     hnsw: m u32, ef_construction u32, ef_search u32, level_mult f64,
//!           rng_state u64, entry u64 (u64::MAX when empty), max_level u32,
//!           tombstone_count u64, tombstone slots u64...
//! record table: count × (id_len u16, id UTF-8, dim × f32)
//! graph block: len u64, then per node (hnsw only; empty for flat):
//!     level u8, (level + 1) × (degree u32, neighbor u32...)
//! crc32c u32 over every preceding byte
//! ```
//!
//! All integers and floats are little-endian. `count` includes tombstoned
//! slots so a decoded index is structurally identical to the encoded one.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use crc::{Crc, CRC_32_ISCSI};

use crate::error::CoreError;
use crate::flat::FlatIndex;
use crate::hnsw::{HnswIndex, HnswParams, MAX_LEVEL};
use crate::index::VectorIndex;
use crate::rng::SplitMix64;

pub const MAGIC: &[u8; 4] = b"GSIX";
pub const FORMAT_VERSION: u16 = 1;

const CRC32C: Crc<u32> = Crc::<u32>::new(&CRC_32_ISCSI);
const NO_ENTRY: u64 = u64::MAX;

pub fn crc32c(bytes: &[u8]) -> u32 {
    CRC32C.checksum(bytes)
}

pub fn encode(index: &VectorIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(index.kind().code());
    out.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    match index {
        VectorIndex::Flat(ix) => encode_flat(ix, &mut out),
        VectorIndex::Hnsw(ix) => encode_hnsw(ix, &mut out),
    }
    let crc = crc32c(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn put_records<'a>(out: &mut Vec<u8>, records: impl Iterator<Item = (&'a str, &'a [f32])>) {
    for (id, v) in records {
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn put_tombstones(out: &mut Vec<u8>, slots: &[u64]) {
    out.extend_from_slice(&(slots.len() as u64).to_le_bytes());
    for s in slots {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

fn encode_flat(ix: &FlatIndex, out: &mut Vec<u8>) {
    out.extend_from_slice(&(ix.slot_count() as u64).to_le_bytes());
    out.extend_from_slice(&ix.seed().to_le_bytes());
    let tombs: Vec<u64> = ix.tombstones().map(|s| s as u64).collect();
    let mut params = Vec::new();
    put_tombstones(&mut params, &tombs);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    out.extend_from_slice(&params);
    put_records(
        out,
        (0..ix.slot_count()).map(|s| (ix.slot_id(s), ix.slot_vector(s))),
    );
    out.extend_from_slice(&0u64.to_le_bytes());
}

fn encode_hnsw(ix: &HnswIndex, out: &mut Vec<u8>) {
    out.extend_from_slice(&(ix.ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&ix.seed.to_le_bytes());
    let mut params = Vec::new();
    params.extend_from_slice(&(ix.params.m as u32).to_le_bytes());
    params.extend_from_slice(&(ix.params.ef_construction as u32).to_le_bytes());
    params.extend_from_slice(&(ix.params.ef_search as u32).to_le_bytes());
    params.extend_from_slice(&ix.params.level_mult.to_le_bytes());
    params.extend_from_slice(&ix.rng.state().to_le_bytes());
    params.extend_from_slice(&ix.entry.map_or(NO_ENTRY, u64::from).to_le_bytes());
    params.extend_from_slice(&(ix.max_level as u32).to_le_bytes());
    let tombs: Vec<u64> = ix
        .dead
        .iter()
        .enumerate()
        .filter(|(_, &d)| d)
        .map(|(i, _)| i as u64)
        .collect();
    put_tombstones(&mut params, &tombs);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    out.extend_from_slice(&params);
    put_records(
        out,
        ix.ids
            .iter()
            .enumerate()
            .map(|(n, id)| (id.as_str(), &ix.vectors[n * ix.dim..(n + 1) * ix.dim])),
    );
    let mut graph = Vec::new();
    for layers in &ix.links {
        graph.push((layers.len() - 1) as u8);
        for nbrs in layers {
            graph.extend_from_slice(&(nbrs.len() as u32).to_le_bytes());
            for n in nbrs {
                graph.extend_from_slice(&n.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&(graph.len() as u64).to_le_bytes());
    out.extend_from_slice(&graph);
}

fn corrupt(why: impl Into<String>) -> CoreError {
    CoreError::CorruptFile(why.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CoreError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, CoreError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CoreError> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32, CoreError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64, CoreError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, CoreError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn read_tombstones(r: &mut Reader<'_>, count: usize) -> Result<Vec<bool>, CoreError> {
    let n = r.u64()?;
    if n > count as u64 {
        return Err(corrupt("more tombstones than records"));
    }
    let mut dead = vec![false; count];
    for _ in 0..n {
        let s = r.u64()?;
        let slot = dead
            .get_mut(usize::try_from(s).map_err(|_| corrupt("tombstone slot overflow"))?)
            .ok_or_else(|| corrupt("tombstone slot out of range"))?;
        if *slot {
            return Err(corrupt("repeated tombstone"));
        }
        *slot = true;
    }
    Ok(dead)
}

fn read_record(r: &mut Reader<'_>, dim: usize, vec_buf: &mut Vec<f32>) -> Result<String, CoreError> {
    let len = r.u16()? as usize;
    let id = core::str::from_utf8(r.take(len)?)
        .map_err(|_| corrupt("record id is not UTF-8"))?
        .into();
    vec_buf.clear();
    for chunk in r.take(dim * 4)?.chunks_exact(4) {
        let x = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        if !x.is_finite() {
            return Err(corrupt("non-finite vector component"));
        }
        vec_buf.push(x);
    }
    Ok(id)
}

/// Decode and verify an index file, optionally checking its dimension.
pub fn decode(bytes: &[u8], expected_dim: Option<usize>) -> Result<VectorIndex, CoreError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32c(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let kind = r.u8()?;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(corrupt("zero dimension"));
    }
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(CoreError::DimensionMismatch { expected, actual: dim });
        }
    }
    let count = usize::try_from(r.u64()?).map_err(|_| corrupt("count overflow"))?;
    // Each record needs at least 2 + 4·dim bytes.
    if count.saturating_mul(2 + 4 * dim) > body.len() {
        return Err(corrupt("record count exceeds file size"));
    }
    let seed = r.u64()?;
    let params_len = r.u32()? as usize;
    let mut p = Reader {
        buf: r.take(params_len)?,
        pos: 0,
    };
    let index = match kind {
        0 => {
            let dead = read_tombstones(&mut p, count)?;
            if !p.done() {
                return Err(corrupt("trailing bytes in params block"));
            }
            let mut ix = FlatIndex::with_seed(dim, seed);
            let mut v = Vec::with_capacity(dim);
            for &is_dead in &dead {
                let id = read_record(&mut r, dim, &mut v)?;
                ix.push_slot(id, &v, is_dead)?;
            }
            if r.u64()? != 0 {
                return Err(corrupt("flat index carries a graph block"));
            }
            VectorIndex::Flat(ix)
        }
        1 => VectorIndex::Hnsw(decode_hnsw(&mut r, &mut p, dim, count, seed)?),
        other => return Err(corrupt(format!("unknown index kind {other}"))),
    };
    if !r.done() {
        return Err(corrupt("trailing bytes before checksum"));
    }
    Ok(index)
}

fn decode_hnsw(
    r: &mut Reader<'_>,
    p: &mut Reader<'_>,
    dim: usize,
    count: usize,
    seed: u64,
) -> Result<HnswIndex, CoreError> {
    let params = HnswParams {
        m: p.u32()? as usize,
        ef_construction: p.u32()? as usize,
        ef_search: p.u32()? as usize,
        level_mult: p.f64()?,
    };
    params.validate().map_err(|e| corrupt(format!("{e}")))?;
    let rng_state = p.u64()?;
    let entry = match p.u64()? {
        NO_ENTRY => None,
        e if (e as usize) < count => Some(e as u32),
        _ => return Err(corrupt("entry point out of range")),
    };
    let max_level = p.u32()? as usize;
    let dead = read_tombstones(p, count)?;
    if !p.done() {
        return Err(corrupt("trailing bytes in params block"));
    }

    let mut ids = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    let mut live = BTreeMap::new();
    let mut v = Vec::with_capacity(dim);
    for (n, &is_dead) in dead.iter().enumerate() {
        let id = read_record(r, dim, &mut v)?;
        if !is_dead && live.insert(id.clone(), n as u32).is_some() {
            return Err(corrupt(format!("duplicate live id `{id}`")));
        }
        ids.push(id);
        vectors.extend_from_slice(&v);
    }

    let graph_len = usize::try_from(r.u64()?).map_err(|_| corrupt("graph length overflow"))?;
    let mut g = Reader {
        buf: r.take(graph_len)?,
        pos: 0,
    };
    let mut links = Vec::with_capacity(count);
    for _ in 0..count {
        let level = g.u8()? as usize;
        if level > MAX_LEVEL || level > max_level {
            return Err(corrupt("node level out of range"));
        }
        let mut layers = Vec::with_capacity(level + 1);
        for layer in 0..=level {
            let degree = g.u32()? as usize;
            if degree > params.max_degree(layer) {
                return Err(corrupt("node degree exceeds cap"));
            }
            let mut nbrs = Vec::with_capacity(degree);
            for _ in 0..degree {
                let n = g.u32()?;
                if n as usize >= count {
                    return Err(corrupt("neighbor out of range"));
                }
                nbrs.push(n);
            }
            layers.push(nbrs);
        }
        links.push(layers);
    }
    if !g.done() {
        return Err(corrupt("trailing bytes in graph block"));
    }
    match entry {
        Some(e) if links[e as usize].len() - 1 != max_level => {
            return Err(corrupt("entry point is not on the top layer"))
        }
        None if count > 0 => return Err(corrupt("non-empty graph without entry point")),
        _ => {}
    }
    Ok(HnswIndex {
        dim,
        params,
        seed,
        rng: SplitMix64::new(rng_state),
        ids,
        vectors,
        dead,
        live,
        links,
        entry,
        max_level,
    })
}
