//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when an operation fails, 2 for usage errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use guiscout_core::{Filters, GenConfig, HnswParams, IndexKind, DEFAULT_BATCH, DEFAULT_DIM, DEFAULT_K, DEFAULT_SEED};

use crate::bench::{self, BenchOptions};
use crate::corpus::{Corpus, CorpusMeta};
use crate::embedder::{self, EmbedError, Embedder, ImageInput};
use crate::genkit::{GenError, Generator, ImageOptions, Refinement, UiArtifact};
use crate::ingest::{self, IngestError, IngestOptions, IngestReport};
use crate::service::{self, Engine, LabelSet, SearchRequest, ServiceError};
use crate::synth::{self, FixtureOptions, SynthOptions};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input the user must fix. Exit code 2.
    Usage(String),
    /// The operation itself failed. Exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::InvalidQuery(_)
            | ServiceError::InvalidLabels(_)
            | ServiceError::BadRequest(_)
            | ServiceError::Gen(GenError::InvalidConfig(_) | GenError::Precondition(_))
            | ServiceError::Embed(EmbedError::EmptyInput { .. } | EmbedError::DecodeFailure { .. }) => usage(e),
            other => fail(other),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::InvalidConfig(_) | GenError::Precondition(_) => usage(e),
            other => fail(other),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Options(_) => usage(e),
            other => fail(other),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "guiscout", version, about = "Search app screenshots by text and generate UI drafts")]
pub struct Cli {
    /// Data directory; the default index lives in `<home>/index`.
    #[arg(long, global = true, env = "GUISCOUT_HOME")]
    pub home: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Flat,
    Hnsw,
}

impl From<Kind> for IndexKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Flat => IndexKind::Flat,
            Kind::Hnsw => IndexKind::Hnsw,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned columns for people.
    Table,
    /// One JSON object per hit.
    Lines,
    /// The HTTP response body.
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct HnswArgs {
    /// HNSW links per node.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// HNSW candidate list size while building.
    #[arg(long, default_value_t = 200)]
    pub ef_construction: usize,
    /// HNSW candidate list size while searching.
    #[arg(long, default_value_t = 100)]
    pub ef_search: usize,
}

impl HnswArgs {
    fn params(&self) -> HnswParams {
        HnswParams { ef_construction: self.ef_construction, ef_search: self.ef_search, ..HnswParams::with_m(self.m) }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a new index from a JSONL manifest.
    Ingest {
        manifest: PathBuf,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Kind::Flat)]
        kind: Kind,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        /// Cosine similarity at which a screenshot counts as a copy.
        #[arg(long, default_value_t = guiscout_core::config::DEFAULT_DEDUP_THRESHOLD)]
        dedup_threshold: f64,
        /// Keep near-identical screenshots.
        #[arg(long)]
        no_dedup: bool,
        #[arg(long, default_value_t = DEFAULT_BATCH)]
        batch: usize,
        /// `reference` or the URL of an embedding server.
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
        /// Exit with status 1 if any record failed.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        hnsw: HnswArgs,
    },
    /// Apply a delta manifest (additions and `{"id", "tombstone": true}` lines).
    Update {
        delta: PathBuf,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BATCH)]
        batch: usize,
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
        #[arg(long)]
        strict: bool,
    },
    /// Rank screenshots for a text query.
    Search {
        text: String,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        /// `platform=ios` or `category=health`; repeatable.
        #[arg(long = "filter")]
        filters: Vec<String>,
        #[arg(long)]
        min_score: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
    },
    /// Zero-shot label a screenshot.
    Classify {
        image: PathBuf,
        /// Candidate label; repeat for each.
        #[arg(long = "label", required = true)]
        labels: Vec<String>,
        /// Take the embedder settings from this index instead of --dim/--seed.
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
        /// Chat and image server for the /generate routes.
        #[arg(long, env = "GUISCOUT_GEN_ENDPOINT")]
        gen_endpoint: Option<String>,
    },
    /// Measure query latency and print a JSON report.
    Bench {
        #[arg(long)]
        index_dir: Option<PathBuf>,
        /// File with one query per line. Without it, synthetic queries are used.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Number of synthetic queries when --queries is absent.
        #[arg(long, default_value_t = 100)]
        num_queries: usize,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        parallel: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "reference", env = "GUISCOUT_EMBEDDER")]
        endpoint: String,
    },
    /// Drive the UI generation pipeline against a model server.
    Generate(GenerateArgs),
    /// Write a corpus of random vectors for benchmarking.
    Synth {
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(short, long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Kind::Flat)]
        kind: Kind,
        #[command(flatten)]
        hnsw: HnswArgs,
    },
    /// Write a small manifest with screenshots for demos and tests.
    Fixture {
        out: PathBuf,
        #[arg(long, default_value_t = 17)]
        screens: usize,
        #[arg(long, default_value_t = 2)]
        duplicates: usize,
        #[arg(long, default_value_t = 1)]
        missing: usize,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Run offline chat, image and embedding servers.
    Mock {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Base URL of the chat and image server.
    #[arg(long, env = "GUISCOUT_GEN_ENDPOINT")]
    pub endpoint: String,
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    /// Directory for the outputs. Without it, JSON goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub step: GenerateStep,
}

#[derive(Subcommand, Debug)]
pub enum GenerateStep {
    /// Expand a short description into UI sections.
    Refine { description: String },
    /// Turn sections (a refine result or a JSON list) into HTML.
    Code {
        #[arg(long)]
        sections: PathBuf,
    },
    /// Change an HTML artifact according to an instruction.
    Adjust {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        instruction: String,
    },
    /// Request UI images in batches.
    Images {
        description: String,
        #[arg(short, long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BATCH)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long, default_value_t = ImageOptions::default().max_rounds)]
        max_rounds: usize,
    },
}

/// Resolve `--index-dir`, falling back to `<home>/index`.
fn index_dir(home: &Option<PathBuf>, explicit: Option<PathBuf>) -> Result<PathBuf, CliError> {
    if let Some(d) = explicit {
        return Ok(d);
    }
    if let Some(h) = home {
        return Ok(h.join("index"));
    }
    std::env::var_os("HOME")
        .map(|h| PathBuf::from(h).join(".guiscout").join("index"))
        .ok_or_else(|| usage("no --index-dir given and neither GUISCOUT_HOME nor HOME is set"))
}

/// The embedder that matches an existing corpus.
fn corpus_embedder(meta: &CorpusMeta, endpoint: &str) -> Result<Arc<dyn Embedder>, CliError> {
    let e: Arc<dyn Embedder> = embedder::from_endpoint(endpoint, meta.dim, meta.seed).map_err(fail)?.into();
    if e.descriptor().name != meta.embedder.name {
        return Err(fail(format!(
            "index was built with embedder `{}` but `{}` was given",
            meta.embedder.name,
            e.descriptor().name
        )));
    }
    Ok(e)
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(fail)?;
    writeln!(out).map_err(fail)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let bytes = serde_json::to_vec_pretty(value).map_err(fail)?;
    std::fs::write(path, bytes).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn finish_ingest(report: &IngestReport, strict: bool) -> Result<(), CliError> {
    print_json(report)?;
    if strict && !report.failed.is_empty() {
        return Err(fail(format!("{} record(s) failed", report.failed.len())));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let home = cli.home;
    match cli.command {
        Command::Ingest {
            manifest,
            index_dir: dir,
            kind,
            seed,
            dim,
            dedup_threshold,
            no_dedup,
            batch,
            endpoint,
            strict,
            hnsw,
        } => {
            let dir = index_dir(&home, dir)?;
            let embedder = embedder::from_endpoint(&endpoint, dim, seed).map_err(fail)?;
            let opts = IngestOptions {
                dim,
                kind: kind.into(),
                seed,
                dedup_threshold: (!no_dedup).then_some(dedup_threshold),
                batch,
                hnsw: hnsw.params(),
            };
            let (_, report) = ingest::ingest(&manifest, &dir, embedder.as_ref(), &opts)?;
            finish_ingest(&report, strict)
        }
        Command::Update { delta, index_dir: dir, batch, endpoint, strict } => {
            let dir = index_dir(&home, dir)?;
            let mut corpus = Corpus::open(&dir).map_err(fail)?;
            let embedder = corpus_embedder(&corpus.meta, &endpoint)?;
            let report = ingest::update(&mut corpus, &delta, embedder.as_ref(), batch)?;
            finish_ingest(&report, strict)
        }
        Command::Search { text, index_dir: dir, k, filters, min_score, format, endpoint } => {
            let mut parsed = Filters::new();
            for f in &filters {
                parsed.add_pair(f).map_err(usage)?;
            }
            let mut req = SearchRequest::new(text, k);
            req.query.filters = parsed;
            req.min_score = min_score;
            req.query.validate().map_err(usage)?;
            let dir = index_dir(&home, dir)?;
            let meta = CorpusMeta::load(&dir).map_err(fail)?;
            let engine = Engine::with_sessions(&dir, corpus_embedder(&meta, &endpoint)?, service::SessionStore::in_memory())?;
            let resp = engine.search(&req)?;
            let mut out = std::io::stdout().lock();
            let w = |r: std::io::Result<()>| r.map_err(fail);
            match format {
                Format::Json => w(writeln!(out, "{}", serde_json::to_string(&resp).map_err(fail)?))?,
                Format::Lines => {
                    for h in &resp.hits {
                        w(writeln!(out, "{}", serde_json::to_string(h).map_err(fail)?))?;
                    }
                }
                Format::Table => {
                    w(writeln!(out, "{:>4}  {:>8}  {:<16}  {:<12}  {:<8}  caption", "rank", "score", "id", "app", "platform"))?;
                    for h in &resp.hits {
                        w(writeln!(
                            out,
                            "{:>4}  {:>8.4}  {:<16}  {:<12}  {:<8}  {}",
                            h.rank,
                            h.score,
                            h.id,
                            h.record.app_id,
                            h.record.platform.as_str(),
                            h.record.caption
                        ))?;
                    }
                }
            }
            Ok(())
        }
        Command::Classify { image, labels, index_dir: dir, dim, seed, endpoint } => {
            let labels = LabelSet::new(labels)?;
            let (dim, seed) = match dir {
                Some(d) => {
                    let meta = CorpusMeta::load(&d).map_err(fail)?;
                    (meta.dim, meta.seed)
                }
                None => (dim, seed),
            };
            let embedder = embedder::from_endpoint(&endpoint, dim, seed).map_err(fail)?;
            let bytes = std::fs::read(&image).map_err(|e| usage(format!("{}: {e}", image.display())))?;
            print_json(&service::classify_with(embedder.as_ref(), ImageInput::Bytes(bytes), &labels)?)
        }
        Command::Serve { index_dir: dir, host, port, endpoint, gen_endpoint } => {
            let dir = index_dir(&home, dir)?;
            let meta = CorpusMeta::load(&dir).map_err(fail)?;
            let mut engine = Engine::open(&dir, corpus_embedder(&meta, &endpoint)?)?;
            if let Some(g) = gen_endpoint {
                engine = engine.with_generator(Generator::default(), g);
            }
            let addr: SocketAddr = format!("{host}:{port}").parse().map_err(usage)?;
            let rt = tokio::runtime::Runtime::new().map_err(fail)?;
            rt.block_on(service::serve(Arc::new(engine), addr)).map_err(fail)
        }
        Command::Bench { index_dir: dir, queries, num_queries, repetitions, k, parallel, out, endpoint } => {
            let queries = match queries {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
                }
                None => synth::synthetic_queries(num_queries, DEFAULT_SEED),
            };
            if queries.is_empty() {
                return Err(usage("no queries to run"));
            }
            let dir = index_dir(&home, dir)?;
            let meta = CorpusMeta::load(&dir).map_err(fail)?;
            let engine = Engine::with_sessions(&dir, corpus_embedder(&meta, &endpoint)?, service::SessionStore::in_memory())?;
            let report = bench::run(Arc::new(engine), &queries, &BenchOptions { k, repetitions, parallel }).map_err(fail)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(p) = out {
                write_json(&p, &report)?;
            }
            print_json(&report)
        }
        Command::Generate(args) => generate(args),
        Command::Synth { index_dir: dir, n, dim, seed, kind, hnsw } => {
            let dir = index_dir(&home, dir)?;
            let corpus = synth::synthesize(&dir, &SynthOptions { n, dim, seed, kind: kind.into(), hnsw: hnsw.params() })
                .map_err(fail)?;
            print_json(&serde_json::json!({
                "index_dir": dir,
                "corpus_size": corpus.index.len(),
                "kind": corpus.meta.kind,
                "dim": dim,
            }))
        }
        Command::Fixture { out, screens, duplicates, missing, dim, seed } => {
            let summary = synth::write_fixture(&out, &FixtureOptions { screens, duplicates, missing, dim, seed })
                .map_err(|e| match e.kind() {
                    std::io::ErrorKind::InvalidInput => usage(e),
                    _ => fail(e),
                })?;
            print_json(&summary)
        }
        Command::Mock { host, port, dim, seed } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().map_err(usage)?;
            let state = Arc::new(crate::mock::MockState::new(dim, seed));
            let rt = tokio::runtime::Runtime::new().map_err(fail)?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("mock model server on http://{}", listener.local_addr()?);
                axum::serve(listener, crate::mock::router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })
            .map_err(fail)
        }
    }
}

/// Sections for the code step: a saved refine result or a bare list.
fn load_sections(path: &Path) -> Result<Refinement, CliError> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_array() {
        let sections = serde_json::from_value(value).map_err(usage)?;
        return Ok(Refinement { sections, provenance: Vec::new() });
    }
    serde_json::from_value(value).map_err(usage)
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let batch = match args.step {
        GenerateStep::Images { batch, .. } => batch,
        _ => 1,
    };
    let cfg = GenConfig { temperature: args.temperature, batch_size: batch, endpoint: args.endpoint.clone() };
    cfg.validate().map_err(usage)?;
    let gen = Generator::default();
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| fail(format!("{}: {e}", out.display())))?;
    }
    let save_html = |artifact: &UiArtifact| -> Result<(), CliError> {
        match &args.out {
            Some(out) => {
                write_json(&out.join("artifact.json"), artifact)?;
                std::fs::write(out.join("index.html"), &artifact.content).map_err(fail)?;
                eprintln!("wrote {}", out.join("index.html").display());
                Ok(())
            }
            None => print_json(artifact),
        }
    };
    match args.step {
        GenerateStep::Refine { description } => {
            let r = gen.refine_description(&description, &cfg)?;
            match &args.out {
                Some(out) => write_json(&out.join("sections.json"), &r),
                None => print_json(&r),
            }
        }
        GenerateStep::Code { sections } => {
            let r = load_sections(&sections)?;
            save_html(&gen.generate_ui_code(&r.sections, &r.provenance, &cfg)?)
        }
        GenerateStep::Adjust { artifact, instruction } => {
            let a: UiArtifact = read_json(&artifact)?;
            save_html(&gen.adjust_ui_code(&a, &instruction, &cfg)?)
        }
        GenerateStep::Images { description, n, parallelism, max_rounds, .. } => {
            let batch = gen.generate_ui_images(&description, n, &cfg, ImageOptions { max_rounds, parallelism })?;
            for r in batch.rounds.iter().filter(|r| r.error.is_some()) {
                eprintln!("warning: round {} failed: {}", r.round, r.error.as_deref().unwrap_or_default());
            }
            match &args.out {
                Some(out) => {
                    for (i, a) in batch.artifacts.iter().enumerate() {
                        let bytes = a.image_bytes().ok_or_else(|| fail("image artifact is not base64"))?;
                        std::fs::write(out.join(format!("image-{:03}.png", i + 1)), bytes).map_err(fail)?;
                    }
                    write_json(&out.join("rounds.json"), &batch.rounds)
                }
                None => print_json(&batch),
            }
        }
    }
}
