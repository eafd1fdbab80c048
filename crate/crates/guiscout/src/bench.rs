//! Latency measurements for the query path.
//!
//! For every query and repetition three timings are taken:
//!
//! - `embed`: embedding the query text
//! - `search`: ranking an already-embedded query (no metadata reads)
//! - `end_to_end`: a full `POST /search` through the HTTP router, including
//!   JSON decoding, embedding, ranking, record lookup and serialization
//!
//! The router is driven in-process, so socket overhead is excluded.

use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::{header, Request};
use guiscout_core::stats::summarize;
use guiscout_core::Filters;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower::ServiceExt;

use crate::service::{router, Engine, SearchRequest, ServiceError};

/// Below this many samples p95 is not meaningful; reported as a warning.
pub const MIN_SAMPLES: usize = 30;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no queries to run")]
    NoQueries,
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("request failed with HTTP {0}")]
    Http(u16),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub k: usize,
    pub repetitions: usize,
    /// Spread queries over all available cores.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { k: guiscout_core::DEFAULT_K, repetitions: 1, parallel: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    pub op: String,
    pub count: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub corpus_size: usize,
    pub index_kind: String,
    pub dim: usize,
    pub embedder: String,
    pub k: usize,
    pub queries: usize,
    pub repetitions: usize,
    pub parallel: bool,
    pub threads: usize,
    pub operations: Vec<OpStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BenchReport {
    pub fn op(&self, name: &str) -> Option<&OpStats> {
        self.operations.iter().find(|o| o.op == name)
    }
}

#[derive(Default)]
struct Samples {
    embed: Vec<f64>,
    search: Vec<f64>,
    end_to_end: Vec<f64>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn run_one(
    engine: &Arc<Engine>,
    app: &axum::Router,
    rt: &tokio::runtime::Runtime,
    query: &str,
    k: usize,
    out: &mut Samples,
) -> Result<(), BenchError> {
    let t = Instant::now();
    let q = engine.embed_query(query)?;
    out.embed.push(ms(t));

    let generation = engine.generation();
    let t = Instant::now();
    let hits = generation.search_embedding(&q, k, &Filters::new(), None)?;
    out.search.push(ms(t));
    std::hint::black_box(hits);

    let body = serde_json::to_vec(&SearchRequest::new(query, k)).expect("serializable request");
    let t = Instant::now();
    let status = rt.block_on(async {
        let req = Request::post("/search")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body))
            .expect("valid request");
        let resp = app.clone().oneshot(req).await.map_err(|e| BenchError::Runtime(e.to_string()))?;
        let status = resp.status();
        axum::body::to_bytes(resp.into_body(), usize::MAX)
            .await
            .map_err(|e| BenchError::Runtime(e.to_string()))?;
        Ok::<_, BenchError>(status)
    })?;
    out.end_to_end.push(ms(t));
    if !status.is_success() {
        return Err(BenchError::Http(status.as_u16()));
    }
    Ok(())
}

fn stats(op: &str, samples: &[f64]) -> OpStats {
    let (p50_ms, p95_ms, p99_ms) = summarize(samples).map_or((0.0, 0.0, 0.0), |p| (p.p50, p.p95, p.p99));
    OpStats {
        op: op.to_string(),
        count: samples.len(),
        p50_ms,
        p95_ms,
        p99_ms,
        mean_ms: if samples.is_empty() { 0.0 } else { samples.iter().sum::<f64>() / samples.len() as f64 },
        max_ms: samples.iter().copied().fold(0.0, f64::max),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, BenchError> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))
}

/// Time every query `opts.repetitions` times.
pub fn run(engine: Arc<Engine>, queries: &[String], opts: &BenchOptions) -> Result<BenchReport, BenchError> {
    if queries.is_empty() {
        return Err(BenchError::NoQueries);
    }
    let work: Vec<&str> = (0..opts.repetitions.max(1)).flat_map(|_| queries.iter().map(String::as_str)).collect();
    let threads = if opts.parallel {
        std::thread::available_parallelism().map_or(1, |n| n.get()).min(work.len())
    } else {
        1
    };

    // One untimed query warms caches and the runtime.
    let app = router(engine.clone());
    run_one(&engine, &app, &runtime()?, work[0], opts.k, &mut Samples::default())?;

    let mut all = Samples::default();
    if threads == 1 {
        let rt = runtime()?;
        for q in &work {
            run_one(&engine, &app, &rt, q, opts.k, &mut all)?;
        }
    } else {
        let chunk = work.len().div_ceil(threads);
        let parts: Vec<Result<Samples, BenchError>> = std::thread::scope(|s| {
            let handles: Vec<_> = work
                .chunks(chunk)
                .map(|part| {
                    let engine = engine.clone();
                    let app = app.clone();
                    s.spawn(move || {
                        let rt = runtime()?;
                        let mut samples = Samples::default();
                        for q in part {
                            run_one(&engine, &app, &rt, q, opts.k, &mut samples)?;
                        }
                        Ok(samples)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
        });
        for part in parts {
            let part = part?;
            all.embed.extend(part.embed);
            all.search.extend(part.search);
            all.end_to_end.extend(part.end_to_end);
        }
    }

    let mut warnings = Vec::new();
    if work.len() < MIN_SAMPLES {
        warnings.push(format!("only {} samples per operation; percentiles are unreliable below {MIN_SAMPLES}", work.len()));
    }
    let health = engine.health();
    Ok(BenchReport {
        corpus_size: health.corpus_size,
        index_kind: health.index_kind,
        dim: health.embedder.dim,
        embedder: health.embedder.name,
        k: opts.k,
        queries: queries.len(),
        repetitions: opts.repetitions.max(1),
        parallel: opts.parallel,
        threads,
        operations: vec![stats("embed", &all.embed), stats("search", &all.search), stats("end_to_end", &all.end_to_end)],
        warnings,
    })
}
