//! Repository manifests: one JSON object per line.
//!
//! ```text
//! {"id":"s1","app_id":"fit","app_url":"https://…","caption":"…","image_path":"img/s1.png","platform":"ios","category":"health"}
//! {"id":"s0","tombstone":true}
//! ```
//!
//! Blank lines are ignored and do not count as manifest lines. Image paths
//! are relative to the manifest's directory and may not climb out of it.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};

use guiscout_core::ScreenRecord;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate id `{id}` on lines {first} and {second}")]
    DuplicateId { id: String, first: usize, second: usize },
    #[error("record `{id}` (line {line}): image {} not found", path.display())]
    MissingImage { id: String, line: usize, path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TombstoneLine {
    id: String,
    tombstone: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawLine {
    Tombstone(TombstoneLine),
    Record(ScreenRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Add(ScreenRecord),
    Tombstone(String),
}

impl Entry {
    pub fn id(&self) -> &str {
        match self {
            Entry::Add(r) => &r.id,
            Entry::Tombstone(id) => id,
        }
    }
}

/// One non-blank manifest line and what it parsed to.
#[derive(Debug)]
pub struct Line {
    pub number: usize,
    pub entry: Result<Entry, ManifestError>,
}

pub fn read_text(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_line(text: &str, number: usize) -> Result<Entry, ManifestError> {
    let parse = |reason: String| ManifestError::Parse { line: number, reason };
    match serde_json::from_str::<RawLine>(text) {
        Ok(RawLine::Tombstone(t)) => {
            if !t.tombstone {
                return Err(parse("`tombstone` must be true when present".into()));
            }
            if t.id.trim().is_empty() {
                return Err(parse("id is empty".into()));
            }
            Ok(Entry::Tombstone(t.id))
        }
        Ok(RawLine::Record(r)) => {
            r.validate().map_err(|e| parse(e.to_string()))?;
            check_relative(&r.image_path).map_err(parse)?;
            Ok(Entry::Add(r))
        }
        Err(e) => Err(parse(format!("not a screen record or tombstone: {e}"))),
    }
}

fn check_relative(p: &str) -> Result<(), String> {
    let path = Path::new(p);
    if path
        .components()
        .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
    {
        Ok(())
    } else {
        Err(format!("image_path `{p}` must be relative and stay inside the repository"))
    }
}

/// Parse every non-blank line independently; duplicate ids are reported on
/// the later line. Image existence is not checked here.
pub fn read_lines(text: &str) -> Vec<Line> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let number = i + 1;
            let entry = parse_line(l, number).and_then(|entry| match seen.get(entry.id()) {
                Some(&first) => Err(ManifestError::DuplicateId {
                    id: entry.id().to_string(),
                    first,
                    second: number,
                }),
                None => {
                    seen.insert(entry.id().to_string(), number);
                    Ok(entry)
                }
            });
            Line { number, entry }
        })
        .collect()
}

pub fn image_root(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Strictly parse a full repository manifest: every line must be a valid
/// record with a unique id and an existing image.
pub fn parse_manifest(path: &Path) -> Result<Vec<ScreenRecord>, ManifestError> {
    let text = read_text(path)?;
    let root = image_root(path);
    let mut records = Vec::new();
    for line in read_lines(&text) {
        match line.entry? {
            Entry::Add(r) => {
                let img = root.join(&r.image_path);
                if !img.is_file() {
                    return Err(ManifestError::MissingImage {
                        id: r.id,
                        line: line.number,
                        path: img,
                    });
                }
                records.push(r);
            }
            Entry::Tombstone(_) => {
                return Err(ManifestError::Parse {
                    line: line.number,
                    reason: "tombstones are only allowed in update manifests".into(),
                })
            }
        }
    }
    Ok(records)
}
