//! Generation pipelines: refine a short description into UI sections, turn
//! sections into HTML, adjust HTML with an instruction, and request batches
//! of UI images.
//!
//! Every artifact carries its provenance: one step per upstream model call,
//! in the order the calls were made.
//!
//! The chat protocol is `POST {endpoint}/v1/chat` with
//! `{"messages": [{"role", "content"}], "temperature"}` answered by
//! `{"content"}`. The image protocol is `POST {endpoint}/v1/images` with
//! `{"prompt", "n"}` answered by `{"images": [base64, ...]}`.

mod reply;
mod templates;

use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use guiscout_core::GenConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reply::{extract_html, parse_sections, render_sections};
pub use templates::{Template, Templates};

const UPSTREAM_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.to_string(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiSection {
    pub name: String,
    pub description: String,
    pub code_example: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    HtmlCode,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Refine,
    Code,
    Adjust,
    Images,
}

/// One upstream call and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceStep {
    pub step: StepKind,
    pub template: Option<String>,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub raw_reply: String,
    pub elapsed_ms: f64,
}

/// Generated markup, or an image whose bytes are stored base64-encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiArtifact {
    pub kind: ArtifactKind,
    pub content: String,
    pub provenance: Vec<ProvenanceStep>,
}

impl UiArtifact {
    pub fn image_bytes(&self) -> Option<Vec<u8>> {
        match self.kind {
            ArtifactKind::Image => base64::engine::general_purpose::STANDARD.decode(&self.content).ok(),
            ArtifactKind::HtmlCode => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub sections: Vec<UiSection>,
    pub provenance: Vec<ProvenanceStep>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Precondition(String),
    #[error("bad prompt template: {0}")]
    Template(String),
    #[error("{step:?} call failed: {reason}")]
    Upstream { step: StepKind, reason: String },
    #[error("could not parse model reply ({reason})")]
    UnparseableReply { reason: String, raw: String },
    #[error("model reply contained no code")]
    EmptyReply { raw: String },
}

/// Speaks to a chat-completion endpoint.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, endpoint: &str, messages: &[ChatMessage], temperature: f64) -> Result<String, String>;
}

/// Speaks to an image-generation endpoint. Returns raw image bytes.
pub trait ImageBackend: Send + Sync {
    fn images(&self, endpoint: &str, prompt: &str, n: usize) -> Result<Vec<Vec<u8>>, String>;
}

pub struct HttpChat {
    agent: ureq::Agent,
}

impl Default for HttpChat {
    fn default() -> Self {
        HttpChat { agent: crate::http_util::agent(UPSTREAM_TIMEOUT) }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

impl ChatBackend for HttpChat {
    fn chat(&self, endpoint: &str, messages: &[ChatMessage], temperature: f64) -> Result<String, String> {
        let url = crate::http_util::join(endpoint, "v1/chat");
        let reply: ChatReply =
            crate::http_util::post_json(&self.agent, &url, &ChatRequest { messages, temperature })?;
        Ok(reply.content)
    }
}

pub struct HttpImages {
    agent: ureq::Agent,
}

impl Default for HttpImages {
    fn default() -> Self {
        HttpImages { agent: crate::http_util::agent(UPSTREAM_TIMEOUT) }
    }
}

#[derive(Serialize)]
struct ImageRequest<'a> {
    prompt: &'a str,
    n: usize,
}

#[derive(Deserialize)]
struct ImageReply {
    images: Vec<String>,
}

impl ImageBackend for HttpImages {
    fn images(&self, endpoint: &str, prompt: &str, n: usize) -> Result<Vec<Vec<u8>>, String> {
        let url = crate::http_util::join(endpoint, "v1/images");
        let reply: ImageReply = crate::http_util::post_json(&self.agent, &url, &ImageRequest { prompt, n })?;
        reply
            .images
            .iter()
            .map(|b| base64::engine::general_purpose::STANDARD.decode(b).map_err(|e| format!("bad base64 image: {e}")))
            .collect()
    }
}

/// Knobs for [`Generator::generate_ui_images`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageOptions {
    /// Hard cap on the number of upstream rounds.
    pub max_rounds: usize,
    /// Rounds in flight at once. 1 means strictly sequential.
    pub parallelism: usize,
}

impl Default for ImageOptions {
    fn default() -> Self {
        ImageOptions { max_rounds: 64, parallelism: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub requested: usize,
    pub received: usize,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of a batched image request. Images from successful rounds are
/// kept even when other rounds fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBatch {
    pub artifacts: Vec<UiArtifact>,
    pub rounds: Vec<RoundLog>,
}

impl ImageBatch {
    pub fn failed_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Number of upstream rounds needed for `n` images at `batch` per round.
pub fn round_count(n: usize, batch: usize) -> usize {
    n.div_ceil(batch.max(1))
}

#[derive(Clone)]
pub struct Generator {
    chat: Arc<dyn ChatBackend>,
    images: Arc<dyn ImageBackend>,
    templates: Templates,
}

impl Default for Generator {
    fn default() -> Self {
        Generator::new(Arc::new(HttpChat::default()), Arc::new(HttpImages::default()))
    }
}

impl Generator {
    pub fn new(chat: Arc<dyn ChatBackend>, images: Arc<dyn ImageBackend>) -> Self {
        Generator { chat, images, templates: Templates::builtin() }
    }

    fn call(
        &self,
        step: StepKind,
        template: &str,
        messages: Vec<ChatMessage>,
        cfg: &GenConfig,
        instruction: Option<&str>,
    ) -> Result<ProvenanceStep, GenError> {
        let started = Instant::now();
        let raw = self
            .chat
            .chat(&cfg.endpoint, &messages, cfg.temperature)
            .map_err(|reason| GenError::Upstream { step, reason })?;
        Ok(ProvenanceStep {
            step,
            template: Some(template.to_string()),
            messages,
            temperature: cfg.temperature,
            endpoint: cfg.endpoint.clone(),
            instruction: instruction.map(str::to_string),
            batch_size: None,
            raw_reply: raw,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Expand a short description into UI sections.
    pub fn refine_description(&self, high_level: &str, cfg: &GenConfig) -> Result<Refinement, GenError> {
        validate(cfg)?;
        if high_level.trim().is_empty() {
            return Err(GenError::Precondition("description is empty".into()));
        }
        let messages = self.templates.refine.render(&[("high_level", high_level.trim())]);
        let step = self.call(StepKind::Refine, "refine.v1", messages, cfg, None)?;
        let sections = parse_sections(&step.raw_reply)
            .map_err(|reason| GenError::UnparseableReply { reason, raw: step.raw_reply.clone() })?;
        Ok(Refinement { sections, provenance: vec![step] })
    }

    /// Write an HTML document implementing `sections`. `prior` is the
    /// provenance of whatever produced the sections.
    pub fn generate_ui_code(
        &self,
        sections: &[UiSection],
        prior: &[ProvenanceStep],
        cfg: &GenConfig,
    ) -> Result<UiArtifact, GenError> {
        validate(cfg)?;
        if sections.is_empty() {
            return Err(GenError::Precondition("no sections to implement".into()));
        }
        let rendered = render_sections(sections);
        let messages = self.templates.code.render(&[("sections", rendered.trim_end())]);
        let step = self.call(StepKind::Code, "code.v1", messages, cfg, None)?;
        html_artifact(prior, step)
    }

    /// Apply `instruction` to an HTML artifact. The full current document is
    /// sent with the instruction.
    pub fn adjust_ui_code(
        &self,
        artifact: &UiArtifact,
        instruction: &str,
        cfg: &GenConfig,
    ) -> Result<UiArtifact, GenError> {
        validate(cfg)?;
        if artifact.kind != ArtifactKind::HtmlCode {
            return Err(GenError::Precondition("only html_code artifacts can be adjusted".into()));
        }
        if instruction.trim().is_empty() {
            return Err(GenError::Precondition("instruction is empty".into()));
        }
        let messages = self
            .templates
            .adjust
            .render(&[("code", artifact.content.as_str()), ("instruction", instruction.trim())]);
        let step = self.call(StepKind::Adjust, "adjust.v1", messages, cfg, Some(instruction.trim()))?;
        html_artifact(&artifact.provenance, step)
    }

    /// Request `n` images for a page description, `cfg.batch_size` per round.
    pub fn generate_ui_images(
        &self,
        page_description: &str,
        n: usize,
        cfg: &GenConfig,
        opts: ImageOptions,
    ) -> Result<ImageBatch, GenError> {
        validate(cfg)?;
        if page_description.trim().is_empty() {
            return Err(GenError::Precondition("page description is empty".into()));
        }
        if n == 0 {
            return Err(GenError::Precondition("n must be at least 1".into()));
        }
        let rounds = round_count(n, cfg.batch_size);
        if rounds > opts.max_rounds {
            return Err(GenError::Precondition(format!(
                "{n} images at batch size {} need {rounds} rounds, above the limit of {}",
                cfg.batch_size, opts.max_rounds
            )));
        }
        let sizes: Vec<usize> = (0..rounds).map(|r| cfg.batch_size.min(n - r * cfg.batch_size)).collect();
        let prompt = page_description.trim();
        let run = |round: usize| -> (RoundLog, Vec<Vec<u8>>) {
            let started = Instant::now();
            let result = self.images.images(&cfg.endpoint, prompt, sizes[round]);
            let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(images) => (
                    RoundLog { round, requested: sizes[round], received: images.len(), elapsed_ms, error: None },
                    images,
                ),
                Err(e) => (
                    RoundLog { round, requested: sizes[round], received: 0, elapsed_ms, error: Some(e) },
                    Vec::new(),
                ),
            }
        };
        let mut results = Vec::with_capacity(rounds);
        for chunk in (0..rounds).collect::<Vec<_>>().chunks(opts.parallelism.max(1)) {
            if chunk.len() == 1 {
                results.push(run(chunk[0]));
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = chunk.iter().map(|&r| s.spawn(move || run(r))).collect();
                    for h in handles {
                        results.push(h.join().expect("image round panicked"));
                    }
                });
            }
        }
        let mut artifacts = Vec::new();
        let mut logs = Vec::new();
        for (log, images) in results {
            let step = ProvenanceStep {
                step: StepKind::Images,
                template: None,
                messages: vec![ChatMessage::new("user", prompt)],
                temperature: cfg.temperature,
                endpoint: cfg.endpoint.clone(),
                instruction: None,
                batch_size: Some(cfg.batch_size),
                raw_reply: format!("round {}: {} of {} images", log.round, log.received, log.requested),
                elapsed_ms: log.elapsed_ms,
            };
            for bytes in images {
                artifacts.push(UiArtifact {
                    kind: ArtifactKind::Image,
                    content: base64::engine::general_purpose::STANDARD.encode(bytes),
                    provenance: vec![step.clone()],
                });
            }
            logs.push(log);
        }
        if artifacts.is_empty() {
            let reason = logs.iter().filter_map(|l| l.error.clone()).next().unwrap_or_else(|| "no images returned".into());
            return Err(GenError::Upstream { step: StepKind::Images, reason });
        }
        Ok(ImageBatch { artifacts, rounds: logs })
    }
}

fn validate(cfg: &GenConfig) -> Result<(), GenError> {
    cfg.validate().map_err(|e| GenError::InvalidConfig(e.to_string()))
}

fn html_artifact(prior: &[ProvenanceStep], step: ProvenanceStep) -> Result<UiArtifact, GenError> {
    let html = extract_html(&step.raw_reply);
    if html.is_empty() {
        return Err(GenError::EmptyReply { raw: step.raw_reply });
    }
    let mut provenance = prior.to_vec();
    provenance.push(step);
    Ok(UiArtifact { kind: ArtifactKind::HtmlCode, content: html, provenance })
}
