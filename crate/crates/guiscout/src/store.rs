//! Metadata store: an append-only JSON-lines record log plus an
//! `id → offset` table.
//!
//! `records.jsonl` holds one [`ScreenRecord`] or tombstone per line and is
//! only ever appended to. `records.offsets` indexes the latest live line of
//! each id:
//!
//! ```text
//! magic "GSMT" | version u16 | count u64 |
//! count × (id_len u16, id, app_len u16, app_id, offset u64, len u32) | crc32c u32
//! ```
//!
//! A missing or damaged offset table is rebuilt by scanning the log.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use guiscout_core::codec::crc32c;
use guiscout_core::ScreenRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "records.jsonl";
pub const OFFSETS_FILE: &str = "records.offsets";
const MAGIC: &[u8; 4] = b"GSMT";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("metadata store io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("record `{0}` not found")]
    NotFound(String),
    #[error("corrupt metadata store: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone)]
struct Slot {
    app_id: String,
    offset: u64,
    len: u32,
}

#[derive(Serialize, Deserialize)]
struct Tombstone<'a> {
    id: &'a str,
    tombstone: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LogLine {
    Tombstone { id: String, tombstone: bool },
    Record(ScreenRecord),
}

pub struct MetadataStore {
    dir: PathBuf,
    file: File,
    end: u64,
    slots: HashMap<String, Slot>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    std::os::unix::fs::FileExt::read_exact_at(file, buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        let n = file.seek_read(buf, offset)?;
        if n == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        buf = &mut buf[n..];
        offset += n as u64;
    }
    Ok(())
}

impl MetadataStore {
    /// Start an empty store in `dir`, discarding any previous log.
    pub fn create(dir: &Path) -> Result<Self, StoreError> {
        let log = dir.join(LOG_FILE);
        File::create(&log).map_err(io_err(&log))?;
        let store = Self::open_log(dir, HashMap::new())?;
        store.write_offsets()?;
        Ok(store)
    }

    /// Open an existing store.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let log = dir.join(LOG_FILE);
        if !log.is_file() {
            return Err(StoreError::Io {
                path: log,
                source: io::ErrorKind::NotFound.into(),
            });
        }
        let log_len = std::fs::metadata(&log).map_err(io_err(&log))?.len();
        let slots = match Self::read_offsets(dir) {
            Some((slots, end)) if end == log_len => slots,
            _ => Self::scan(&log)?,
        };
        Self::open_log(dir, slots)
    }

    fn open_log(dir: &Path, slots: HashMap<String, Slot>) -> Result<Self, StoreError> {
        let log = dir.join(LOG_FILE);
        let file = OpenOptions::new()
            .read(true)
            .append(true)
            .open(&log)
            .map_err(io_err(&log))?;
        let end = file.metadata().map_err(io_err(&log))?.len();
        Ok(MetadataStore {
            dir: dir.to_path_buf(),
            file,
            end,
            slots,
        })
    }

    fn scan(log: &Path) -> Result<HashMap<String, Slot>, StoreError> {
        let reader = BufReader::new(File::open(log).map_err(io_err(log))?);
        let mut slots = HashMap::new();
        let mut offset = 0u64;
        for (n, line) in reader.split(b'\n').enumerate() {
            let line = line.map_err(io_err(log))?;
            let len = line.len() as u64 + 1;
            if !line.is_empty() {
                match serde_json::from_slice::<LogLine>(&line) {
                    Ok(LogLine::Record(r)) => {
                        slots.insert(
                            r.id,
                            Slot {
                                app_id: r.app_id,
                                offset,
                                len: line.len() as u32,
                            },
                        );
                    }
                    Ok(LogLine::Tombstone { id, tombstone: true }) => {
                        slots.remove(&id);
                    }
                    _ => return Err(StoreError::Corrupt(format!("log line {} is not a record", n + 1))),
                }
            }
            offset += len;
        }
        Ok(slots)
    }

    /// Returns the table and the log length it describes.
    fn read_offsets(dir: &Path) -> Option<(HashMap<String, Slot>, u64)> {
        let bytes = std::fs::read(dir.join(OFFSETS_FILE)).ok()?;
        if bytes.len() < 22 || &bytes[..4] != MAGIC {
            return None;
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32c(body) != u32::from_le_bytes(tail.try_into().ok()?) {
            return None;
        }
        let mut pos = 4;
        let mut take = |n: usize| -> Option<&[u8]> {
            let s = body.get(pos..pos + n)?;
            pos += n;
            Some(s)
        };
        if u16::from_le_bytes(take(2)?.try_into().ok()?) != VERSION {
            return None;
        }
        let log_len = u64::from_le_bytes(take(8)?.try_into().ok()?);
        let count = u64::from_le_bytes(take(8)?.try_into().ok()?);
        let mut slots = HashMap::new();
        for _ in 0..count {
            let n = u16::from_le_bytes(take(2)?.try_into().ok()?) as usize;
            let id = String::from_utf8(take(n)?.to_vec()).ok()?;
            let n = u16::from_le_bytes(take(2)?.try_into().ok()?) as usize;
            let app_id = String::from_utf8(take(n)?.to_vec()).ok()?;
            let offset = u64::from_le_bytes(take(8)?.try_into().ok()?);
            let len = u32::from_le_bytes(take(4)?.try_into().ok()?);
            slots.insert(id, Slot { app_id, offset, len });
        }
        Some((slots, log_len))
    }

    /// Persist the offset table (written to a temporary file, then renamed).
    pub fn write_offsets(&self) -> Result<(), StoreError> {
        let mut entries: Vec<(&String, &Slot)> = self.slots.iter().collect();
        entries.sort_by_key(|(_, s)| s.offset);
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.end.to_le_bytes());
        out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for (id, s) in entries {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(s.app_id.len() as u16).to_le_bytes());
            out.extend_from_slice(s.app_id.as_bytes());
            out.extend_from_slice(&s.offset.to_le_bytes());
            out.extend_from_slice(&s.len.to_le_bytes());
        }
        let crc = crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        let path = self.dir.join(OFFSETS_FILE);
        let tmp = self.dir.join(format!("{OFFSETS_FILE}.tmp"));
        std::fs::write(&tmp, &out).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    fn append_line(&mut self, line: &[u8]) -> Result<u64, StoreError> {
        let log = self.dir.join(LOG_FILE);
        let offset = self.end;
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line);
        buf.push(b'\n');
        self.file.write_all(&buf).map_err(io_err(&log))?;
        self.end += buf.len() as u64;
        Ok(offset)
    }

    /// Append a record; a live record with the same id is superseded.
    pub fn append(&mut self, record: &ScreenRecord) -> Result<(), StoreError> {
        let line = serde_json::to_vec(record).expect("records serialize");
        let offset = self.append_line(&line)?;
        self.slots.insert(
            record.id.clone(),
            Slot {
                app_id: record.app_id.clone(),
                offset,
                len: line.len() as u32,
            },
        );
        Ok(())
    }

    /// Tombstone `id`; returns whether it was live.
    pub fn tombstone(&mut self, id: &str) -> Result<bool, StoreError> {
        if !self.slots.contains_key(id) {
            return Ok(false);
        }
        let line = serde_json::to_vec(&Tombstone { id, tombstone: true }).expect("serializes");
        self.append_line(&line)?;
        self.slots.remove(id);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.contains_key(id)
    }

    fn read_slot(&self, slot: &Slot) -> Result<ScreenRecord, StoreError> {
        let mut buf = vec![0u8; slot.len as usize];
        let log = self.dir.join(LOG_FILE);
        read_exact_at(&self.file, &mut buf, slot.offset).map_err(io_err(&log))?;
        serde_json::from_slice(&buf).map_err(|e| StoreError::Corrupt(format!("record at offset {}: {e}", slot.offset)))
    }

    pub fn get(&self, id: &str) -> Result<ScreenRecord, StoreError> {
        let slot = self.slots.get(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        self.read_slot(slot)
    }

    /// Every live record of `app_id`, in the order it was ingested.
    pub fn list_app(&self, app_id: &str) -> Result<Vec<ScreenRecord>, StoreError> {
        let mut slots: Vec<&Slot> = self.slots.values().filter(|s| s.app_id == app_id).collect();
        if slots.is_empty() {
            return Err(StoreError::NotFound(app_id.to_string()));
        }
        slots.sort_by_key(|s| s.offset);
        slots.into_iter().map(|s| self.read_slot(s)).collect()
    }

    /// Live ids in log order.
    pub fn ids(&self) -> Vec<String> {
        let mut v: Vec<(&String, u64)> = self.slots.iter().map(|(id, s)| (id, s.offset)).collect();
        v.sort_by_key(|(_, o)| *o);
        v.into_iter().map(|(id, _)| id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use guiscout_core::Platform;

    fn rec(id: &str, app: &str) -> ScreenRecord {
        ScreenRecord {
            id: id.into(),
            app_id: app.into(),
            app_url: format!("https://apps.example/{app}"),
            caption: format!("caption of {id}"),
            image_path: format!("{id}.png"),
            platform: Platform::Android,
            category: Some("health".into()),
        }
    }

    #[test]
    fn get_and_list_app() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = MetadataStore::create(dir.path()).unwrap();
        for (id, app) in [("a", "x"), ("b", "y"), ("c", "x"), ("d", "x")] {
            s.append(&rec(id, app)).unwrap();
        }
        assert_eq!(s.get("b").unwrap(), rec("b", "y"));
        assert!(matches!(s.get("zzz"), Err(StoreError::NotFound(_))));
        let ids: Vec<_> = s.list_app("x").unwrap().into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["a", "c", "d"]);
        assert!(matches!(s.list_app("nope"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn reopen_uses_offsets_or_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = MetadataStore::create(dir.path()).unwrap();
        s.append(&rec("a", "x")).unwrap();
        s.append(&rec("b", "x")).unwrap();
        assert!(s.tombstone("a").unwrap());
        assert!(!s.tombstone("a").unwrap());
        s.write_offsets().unwrap();
        drop(s);

        let s = MetadataStore::open(dir.path()).unwrap();
        assert_eq!(s.ids(), ["b"]);

        std::fs::remove_file(dir.path().join(OFFSETS_FILE)).unwrap();
        let s = MetadataStore::open(dir.path()).unwrap();
        assert_eq!(s.ids(), ["b"]);
        assert_eq!(s.get("b").unwrap(), rec("b", "x"));
    }

    #[test]
    fn stale_offsets_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = MetadataStore::create(dir.path()).unwrap();
        s.append(&rec("a", "x")).unwrap();
        s.write_offsets().unwrap();
        s.append(&rec("b", "x")).unwrap();
        drop(s);
        let s = MetadataStore::open(dir.path()).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn readding_supersedes() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = MetadataStore::create(dir.path()).unwrap();
        s.append(&rec("a", "x")).unwrap();
        s.tombstone("a").unwrap();
        let mut again = rec("a", "x");
        again.caption = "new caption".into();
        s.append(&again).unwrap();
        assert_eq!(s.get("a").unwrap().caption, "new caption");
    }
}
