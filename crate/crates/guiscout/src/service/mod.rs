//! The query engine behind the HTTP API and the command line.
//!
//! An [`Engine`] holds the current corpus generation behind an
//! `RwLock<Arc<_>>`. Readers clone the `Arc` and keep answering from it while
//! a reload swaps in a new generation.

mod http;
pub mod sessions;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use guiscout_core::{Classification, CoreError, Embedding, Filters, Platform, Query, RankedHit, ScreenRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::embedder::{EmbedError, Embedder, EmbedderDescriptor, ImageInput};
use crate::genkit::{GenError, Generator};
use crate::store::StoreError;

pub use http::{router, serve};
pub use sessions::{Session, SessionError, SessionStore};

/// Candidates fetched per requested hit before filtering.
const OVERFETCH: usize = 4;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    InvalidQuery(String),
    #[error("{0}")]
    InvalidLabels(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("generation endpoints are not configured")]
    GenUnavailable,
    #[error("{0}")]
    Internal(String),
}

impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidQuery(m) => ServiceError::InvalidQuery(m),
            CoreError::EmptyLabelSet => ServiceError::InvalidLabels("label set is empty".into()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ServiceError::NotFound(format!("record `{id}` not found")),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::UnknownSession(id) => ServiceError::UnknownSession(id),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    #[serde(flatten)]
    pub query: Query,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_score: Option<f64>,
}

impl SearchRequest {
    pub fn new(text: impl Into<String>, k: usize) -> Self {
        SearchRequest {
            query: Query { text: text.into(), k, filters: Filters::new() },
            min_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: usize,
    pub id: String,
    pub score: f64,
    pub record: ScreenRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub hits: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: String,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub similarities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub generation: u64,
    pub corpus_size: usize,
    pub index_kind: String,
    pub embedder: EmbedderDescriptor,
}

/// A non-empty list of distinct, non-blank labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new(labels: Vec<String>) -> Result<Self, ServiceError> {
        if labels.is_empty() {
            return Err(ServiceError::InvalidLabels("label set is empty".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() {
                return Err(ServiceError::InvalidLabels(format!("label {i} is blank")));
            }
            if labels[..i].contains(l) {
                return Err(ServiceError::InvalidLabels(format!("label `{l}` appears twice")));
            }
        }
        Ok(LabelSet(labels))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

/// One loaded corpus plus the attributes filters look at.
pub struct Generation {
    pub number: u64,
    pub corpus: Corpus,
    attrs: HashMap<String, (Platform, Option<String>)>,
}

impl Generation {
    fn load(number: u64, corpus: Corpus) -> Result<Self, ServiceError> {
        let mut attrs = HashMap::with_capacity(corpus.index.len());
        for id in corpus.store.ids() {
            let r = corpus.store.get(&id)?;
            attrs.insert(id, (r.platform, r.category));
        }
        Ok(Generation { number, corpus, attrs })
    }

    fn passes(&self, filters: &Filters, id: &str) -> bool {
        self.attrs
            .get(id)
            .is_some_and(|(p, c)| filters.matches_fields(*p, c.as_deref()))
    }

    /// Ranked ids for an already-embedded query. No metadata is read.
    pub fn search_embedding(
        &self,
        q: &Embedding,
        k: usize,
        filters: &Filters,
        min_score: Option<f64>,
    ) -> Result<Vec<RankedHit>, ServiceError> {
        let index = &self.corpus.index;
        let size = index.len();
        if size == 0 {
            return Ok(Vec::new());
        }
        let mut hits = if filters.is_empty() {
            index.search(q, k)?
        } else {
            let fetch = size.min(k.saturating_mul(OVERFETCH));
            let mut hits: Vec<RankedHit> = index
                .search(q, fetch)?
                .into_iter()
                .filter(|h| self.passes(filters, &h.record_id))
                .take(k)
                .collect();
            if hits.len() < k && fetch < size {
                hits = index.search_where(q, k, |id: &str| self.passes(filters, id))?;
            }
            hits
        };
        if let Some(min) = min_score {
            hits.retain(|h| h.score >= min);
        }
        for (i, h) in hits.iter_mut().enumerate() {
            h.rank = i + 1;
        }
        Ok(hits)
    }
}

pub struct Engine {
    dir: PathBuf,
    current: RwLock<Arc<Generation>>,
    embedder: Arc<dyn Embedder>,
    sessions: SessionStore,
    generator: Option<Generator>,
    gen_endpoint: Option<String>,
}

impl Engine {
    /// Open the corpus in `dir` and persist sessions next to it.
    pub fn open(dir: &Path, embedder: Arc<dyn Embedder>) -> Result<Self, ServiceError> {
        let sessions = SessionStore::open(dir)?;
        Self::with_sessions(dir, embedder, sessions)
    }

    pub fn with_sessions(dir: &Path, embedder: Arc<dyn Embedder>, sessions: SessionStore) -> Result<Self, ServiceError> {
        let corpus = Corpus::open(dir).map_err(corpus_err)?;
        check_embedder(&corpus, embedder.descriptor())?;
        Ok(Engine {
            dir: dir.to_path_buf(),
            current: RwLock::new(Arc::new(Generation::load(1, corpus)?)),
            embedder,
            sessions,
            generator: None,
            gen_endpoint: None,
        })
    }

    /// Enable the `/generate/*` routes against `endpoint`.
    pub fn with_generator(mut self, generator: Generator, endpoint: impl Into<String>) -> Self {
        self.generator = Some(generator);
        self.gen_endpoint = Some(endpoint.into());
        self
    }

    pub fn generation(&self) -> Arc<Generation> {
        self.current.read().expect("generation lock").clone()
    }

    /// Re-open the corpus directory and make it the current generation.
    pub fn reload(&self) -> Result<u64, ServiceError> {
        let corpus = Corpus::open(&self.dir).map_err(corpus_err)?;
        check_embedder(&corpus, self.embedder.descriptor())?;
        let number = self.generation().number + 1;
        let next = Arc::new(Generation::load(number, corpus)?);
        *self.current.write().expect("generation lock") = next;
        Ok(number)
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn generator(&self) -> Result<(&Generator, &str), ServiceError> {
        match (&self.generator, &self.gen_endpoint) {
            (Some(g), Some(e)) => Ok((g, e)),
            _ => Err(ServiceError::GenUnavailable),
        }
    }

    pub fn embed_query(&self, text: &str) -> Result<Embedding, ServiceError> {
        let mut v = self.embedder.embed_text(&[text.to_string()])?;
        v.pop().ok_or_else(|| ServiceError::Internal("embedder returned no vector".into()))
    }

    pub fn search(&self, req: &SearchRequest) -> Result<SearchResponse, ServiceError> {
        req.query.validate()?;
        if let Some(m) = req.min_score {
            if !m.is_finite() {
                return Err(ServiceError::InvalidQuery("min_score must be finite".into()));
            }
        }
        let q = self.embed_query(&req.query.text)?;
        let generation = self.generation();
        let hits = generation.search_embedding(&q, req.query.k, &req.query.filters, req.min_score)?;
        let hits = hits
            .into_iter()
            .map(|h| {
                let record = generation.corpus.store.get(&h.record_id)?;
                Ok(SearchHit { rank: h.rank, id: h.record_id, score: h.score, record })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        Ok(SearchResponse { hits })
    }

    pub fn classify(&self, image: ImageInput, labels: &LabelSet) -> Result<ClassifyResponse, ServiceError> {
        classify_with(self.embedder.as_ref(), image, labels)
    }

    pub fn get_record(&self, id: &str) -> Result<ScreenRecord, ServiceError> {
        Ok(self.generation().corpus.store.get(id)?)
    }

    pub fn list_app(&self, app_id: &str) -> Result<Vec<ScreenRecord>, ServiceError> {
        match self.generation().corpus.store.list_app(app_id) {
            Err(StoreError::NotFound(_)) => Err(ServiceError::NotFound(format!("app `{app_id}` not found"))),
            other => Ok(other?),
        }
    }

    /// Path of the screenshot for a record.
    pub fn image_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        let generation = self.generation();
        let record = generation.corpus.store.get(id)?;
        Ok(generation.corpus.resolve_image(&record.image_path))
    }

    pub fn health(&self) -> Health {
        let generation = self.generation();
        Health {
            status: "ok".into(),
            generation: generation.number,
            corpus_size: generation.corpus.index.len(),
            index_kind: generation.corpus.index.kind().to_string(),
            embedder: self.embedder.descriptor().clone(),
        }
    }

    pub fn pin(&self, session: &str, record_id: &str) -> Result<Session, ServiceError> {
        self.sessions.get(session)?;
        if !self.generation().corpus.store.contains(record_id) {
            return Err(ServiceError::UnknownRecord(record_id.to_string()));
        }
        Ok(self.sessions.pin(session, record_id)?)
    }

    /// Run a search and append it to the session history.
    pub fn session_search(&self, session: &str, req: &SearchRequest) -> Result<SearchResponse, ServiceError> {
        self.sessions.get(session)?;
        let resp = self.search(req)?;
        self.sessions.record_query(session, req.query.clone())?;
        Ok(resp)
    }
}

/// Zero-shot classification of one image against `labels`.
pub fn classify_with(embedder: &dyn Embedder, image: ImageInput, labels: &LabelSet) -> Result<ClassifyResponse, ServiceError> {
    let img = embedder.embed_image(&[image])?.pop().expect("one image in, one out");
    let texts = embedder.embed_text(labels.as_slice())?;
    let sims = texts
        .iter()
        .map(|t| guiscout_core::cosine(&img, t))
        .collect::<Result<Vec<f64>, CoreError>>()?;
    let c = Classification::from_similarities(sims)?;
    Ok(ClassifyResponse {
        label: labels.as_slice()[c.label_index].clone(),
        labels: labels.as_slice().to_vec(),
        probs: c.probabilities,
        similarities: c.similarities,
    })
}

fn corpus_err(e: CorpusError) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

fn check_embedder(corpus: &Corpus, d: &EmbedderDescriptor) -> Result<(), ServiceError> {
    if d.dim != corpus.meta.dim {
        return Err(ServiceError::Embed(EmbedError::DimensionMismatch { expected: corpus.meta.dim, actual: d.dim }));
    }
    Ok(())
}
