//! Building and updating an indexed corpus from a manifest.
//!
//! Items fail individually: an unreadable image or a malformed line is
//! recorded in the [`IngestReport`] and the run continues. Only an
//! unreadable manifest, an embedder of the wrong dimension or an IO error
//! on the output directory abort.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use guiscout_core::config::DEFAULT_DEDUP_THRESHOLD;
use guiscout_core::{CoreError, Embedding, HnswParams, IndexKind, ScreenRecord, VectorIndex, DEFAULT_BATCH, DEFAULT_SEED};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, CorpusMeta, META_VERSION};
use crate::embedder::{Embedder, ImageInput};
use crate::manifest::{self, Entry, ManifestError};
use crate::store::{MetadataStore, StoreError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("embedder produces {actual}-dim vectors but the repository is {expected}-dim")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("update manifest lives in {}, but the corpus images are rooted at {}", found.display(), expected.display())]
    ImageRootMismatch { expected: PathBuf, found: PathBuf },
    #[error("invalid ingest options: {0}")]
    Options(String),
    #[error("cannot create {}: {source}", path.display())]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Index(#[from] CoreError),
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub dim: usize,
    pub kind: IndexKind,
    pub seed: u64,
    /// `None` disables deduplication.
    pub dedup_threshold: Option<f64>,
    pub batch: usize,
    pub hnsw: HnswParams,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            dim: guiscout_core::DEFAULT_DIM,
            kind: IndexKind::Flat,
            seed: DEFAULT_SEED,
            dedup_threshold: Some(DEFAULT_DEDUP_THRESHOLD),
            batch: DEFAULT_BATCH,
            hnsw: HnswParams::default(),
        }
    }
}

impl IngestOptions {
    fn validate(&self) -> Result<(), IngestError> {
        if let Some(t) = self.dedup_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(IngestError::Options(format!("dedup threshold {t} outside (0, 1]")));
            }
        }
        if self.batch == 0 {
            return Err(IngestError::Options("batch must be at least 1".into()));
        }
        self.hnsw.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedItem {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Duplicate {
    pub id: String,
    pub duplicate_of: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub total_lines: usize,
    pub ingested: usize,
    pub skipped_duplicates: usize,
    pub tombstoned: usize,
    pub failed: Vec<FailedItem>,
    pub duplicates: Vec<Duplicate>,
    #[serde(rename = "elapsed_ms", serialize_with = "millis")]
    pub elapsed: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

impl IngestReport {
    /// Every manifest line lands in exactly one bucket.
    pub fn balances(&self) -> bool {
        self.ingested + self.skipped_duplicates + self.tombstoned + self.failed.len() == self.total_lines
    }

    fn fail(&mut self, line: usize, id: Option<&str>, reason: impl Into<String>) {
        self.failed.push(FailedItem {
            line,
            id: id.map(str::to_string),
            reason: reason.into(),
        });
    }
}

struct Pending {
    line: usize,
    record: ScreenRecord,
}

/// Shared write path of ingest and update.
struct Writer<'a> {
    index: &'a mut VectorIndex,
    store: &'a mut MetadataStore,
    embedder: &'a dyn Embedder,
    image_root: &'a Path,
    dedup_threshold: Option<f64>,
    report: IngestReport,
    pending: Vec<Pending>,
    batch: usize,
}

impl Writer<'_> {
    fn push(&mut self, line: usize, record: ScreenRecord) -> Result<(), IngestError> {
        self.pending.push(Pending { line, record });
        if self.pending.len() >= self.batch {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), IngestError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let batch = std::mem::take(&mut self.pending);
        let inputs: Vec<ImageInput> = batch
            .iter()
            .map(|p| ImageInput::Path(self.image_root.join(&p.record.image_path)))
            .collect();
        let results = match self.embedder.embed_images(&inputs) {
            Ok(r) => r,
            Err(e) => {
                for p in &batch {
                    self.report.fail(p.line, Some(&p.record.id), e.to_string());
                }
                return Ok(());
            }
        };
        for (p, result) in batch.into_iter().zip(results) {
            match result {
                Ok(e) => self.admit(p, &e)?,
                Err(err) => self.report.fail(p.line, Some(&p.record.id), err.to_string()),
            }
        }
        Ok(())
    }

    fn admit(&mut self, p: Pending, e: &Embedding) -> Result<(), IngestError> {
        if let Some(threshold) = self.dedup_threshold {
            if let Some(best) = self.index.search(e, 1)?.into_iter().next() {
                if best.score >= threshold {
                    self.report.skipped_duplicates += 1;
                    self.report.duplicates.push(Duplicate {
                        id: p.record.id,
                        duplicate_of: best.record_id,
                        similarity: best.score,
                    });
                    return Ok(());
                }
            }
        }
        self.index.insert(&p.record.id, e)?;
        self.store.append(&p.record)?;
        self.report.ingested += 1;
        Ok(())
    }

    fn apply(&mut self, lines: Vec<manifest::Line>, allow_tombstones: bool) -> Result<(), IngestError> {
        self.report.total_lines = lines.len();
        for line in lines {
            match line.entry {
                Err(e) => {
                    let id = match &e {
                        ManifestError::DuplicateId { id, .. } => Some(id.clone()),
                        _ => None,
                    };
                    self.report.fail(line.number, id.as_deref(), e.to_string());
                }
                Ok(Entry::Add(record)) => {
                    if self.index.contains(&record.id) {
                        self.report.fail(line.number, Some(&record.id), "id already present");
                    } else {
                        self.push(line.number, record)?;
                    }
                }
                Ok(Entry::Tombstone(id)) => {
                    self.flush()?;
                    if !allow_tombstones {
                        self.report
                            .fail(line.number, Some(&id), "tombstones are only allowed in update manifests");
                    } else if self.index.remove(&id) {
                        self.store.tombstone(&id)?;
                        self.report.tombstoned += 1;
                    } else {
                        self.report.fail(line.number, Some(&id), "tombstone for unknown id");
                    }
                }
            }
        }
        self.flush()
    }
}

fn check_dim(embedder: &dyn Embedder, dim: usize) -> Result<(), IngestError> {
    let actual = embedder.descriptor().dim;
    if actual != dim {
        return Err(IngestError::DimensionMismatch { expected: dim, actual });
    }
    Ok(())
}

/// Embed every record of `manifest_path` into a fresh corpus in `out_dir`.
pub fn ingest(
    manifest_path: &Path,
    out_dir: &Path,
    embedder: &dyn Embedder,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport), IngestError> {
    let started = Instant::now();
    opts.validate()?;
    check_dim(embedder, opts.dim)?;
    let text = manifest::read_text(manifest_path)?;
    std::fs::create_dir_all(out_dir).map_err(|source| IngestError::OutputDir {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let image_root = std::path::absolute(manifest::image_root(manifest_path)).map_err(|source| {
        IngestError::OutputDir {
            path: manifest_path.to_path_buf(),
            source,
        }
    })?;

    let mut index = VectorIndex::new(opts.kind, opts.dim, opts.seed, opts.hnsw)?;
    let mut store = MetadataStore::create(out_dir)?;
    let mut w = Writer {
        index: &mut index,
        store: &mut store,
        embedder,
        image_root: &image_root,
        dedup_threshold: opts.dedup_threshold,
        report: IngestReport::default(),
        pending: Vec::new(),
        batch: opts.batch,
    };
    w.apply(manifest::read_lines(&text), false)?;
    let mut report = w.report;

    let corpus = Corpus {
        dir: out_dir.to_path_buf(),
        meta: CorpusMeta {
            version: META_VERSION,
            dim: opts.dim,
            seed: opts.seed,
            kind: opts.kind,
            hnsw: opts.hnsw.into(),
            embedder: embedder.descriptor().clone(),
            image_root,
            dedup_threshold: opts.dedup_threshold,
        },
        index,
        store,
    };
    corpus.save()?;
    report.elapsed = started.elapsed();
    Ok((corpus, report))
}

/// Apply a delta manifest of additions and tombstones to an open corpus
/// and persist it.
pub fn update(
    corpus: &mut Corpus,
    delta_path: &Path,
    embedder: &dyn Embedder,
    batch: usize,
) -> Result<IngestReport, IngestError> {
    let started = Instant::now();
    check_dim(embedder, corpus.meta.dim)?;
    let text = manifest::read_text(delta_path)?;
    let image_root = corpus.meta.image_root.clone();
    let delta_root = manifest::image_root(delta_path);
    let same_root = match (delta_root.canonicalize(), image_root.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if !same_root {
        return Err(IngestError::ImageRootMismatch {
            expected: image_root,
            found: delta_root,
        });
    }
    let mut w = Writer {
        index: &mut corpus.index,
        store: &mut corpus.store,
        embedder,
        image_root: &image_root,
        dedup_threshold: corpus.meta.dedup_threshold,
        report: IngestReport::default(),
        pending: Vec::new(),
        batch: batch.max(1),
    };
    w.apply(manifest::read_lines(&text), true)?;
    let mut report = w.report;
    corpus.save()?;
    report.elapsed = started.elapsed();
    Ok(report)
}
