//! Offline stand-ins for the model endpoints: chat, image generation and
//! embedding. They back the test suites and `guiscout mock`, and count the
//! calls they receive so callers can assert on upstream traffic.
//!
//! The chat mock has two modes. In example mode it reads the
//! `guiscout-step:` marker from the system prompt and answers the way a
//! cooperative model would for a health monitoring report page. In scripted
//! mode it replays a fixed list of `(status, content)` replies in order.

use std::collections::{HashSet, VecDeque};
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;

use crate::embedder::{Embedder, ImageInput, ReferenceEmbedder};
use crate::genkit::{parse_sections, ChatMessage, UiSection};

/// The four sections the example-mode model proposes for any description.
pub const EXAMPLE_SECTIONS: [(&str, &str, &str); 4] = [
    (
        "header section",
        "App title with the report date and a back button",
        "<header class=\"header\"><button>Back</button><h1>Health Report</h1><span>Today</span></header>",
    ),
    (
        "profile section",
        "Avatar, name, age and the monitored device",
        "<section class=\"profile\"><img alt=\"avatar\"><h2>Alex</h2><p>Age 34</p></section>",
    ),
    (
        "summary section",
        "Key vitals: heart rate, blood pressure, sleep and steps",
        "<section class=\"summary\"><div>72 bpm</div><div>120/80</div><div>7h 30m</div><div>8,214 steps</div></section>",
    ),
    (
        "charts section",
        "Weekly trend charts for heart rate and sleep",
        "<section class=\"charts\"><canvas id=\"heart\"></canvas><canvas id=\"sleep\"></canvas></section>",
    ),
];

const FOOTER: &str = "<footer class=\"footer-section\" data-section=\"footer section\"><p>Data synced from your devices</p></footer>";

#[derive(Debug, Clone)]
pub enum ChatMode {
    Example,
    Scripted(VecDeque<(u16, String)>),
}

/// Shared state of a mock server. All counters are readable from tests.
pub struct MockState {
    chat_mode: Mutex<ChatMode>,
    chat_requests: Mutex<Vec<Vec<ChatMessage>>>,
    image_rounds: Mutex<Vec<usize>>,
    failing_image_rounds: HashSet<usize>,
    embed_calls: Mutex<usize>,
    embedder: ReferenceEmbedder,
    advertised_dim: usize,
}

impl MockState {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockState {
            chat_mode: Mutex::new(ChatMode::Example),
            chat_requests: Mutex::new(Vec::new()),
            image_rounds: Mutex::new(Vec::new()),
            failing_image_rounds: HashSet::new(),
            embed_calls: Mutex::new(0),
            embedder: ReferenceEmbedder::new(dim, seed),
            advertised_dim: dim,
        }
    }

    pub fn scripted(mut self, replies: Vec<(u16, String)>) -> Self {
        self.chat_mode = Mutex::new(ChatMode::Scripted(replies.into()));
        self
    }

    /// Make the given zero-based image rounds answer 500.
    pub fn failing_image_rounds(mut self, rounds: impl IntoIterator<Item = usize>) -> Self {
        self.failing_image_rounds = rounds.into_iter().collect();
        self
    }

    /// Report a different dimension in `/info` than the vectors have.
    pub fn advertise_dim(mut self, dim: usize) -> Self {
        self.advertised_dim = dim;
        self
    }

    pub fn chat_requests(&self) -> Vec<Vec<ChatMessage>> {
        self.chat_requests.lock().unwrap().clone()
    }

    /// Requested `n` of every image call, in arrival order.
    pub fn image_rounds(&self) -> Vec<usize> {
        self.image_rounds.lock().unwrap().clone()
    }

    pub fn embed_calls(&self) -> usize {
        *self.embed_calls.lock().unwrap()
    }

    /// Total upstream calls of any kind.
    pub fn total_calls(&self) -> usize {
        self.chat_requests.lock().unwrap().len() + self.image_rounds.lock().unwrap().len() + self.embed_calls()
    }
}

/// Answer a chat request the way the example-mode model does.
pub fn example_reply(messages: &[ChatMessage]) -> Result<String, String> {
    let system = messages.iter().find(|m| m.role == "system").map_or("", |m| m.content.as_str());
    let user = messages.iter().rev().find(|m| m.role == "user").map_or("", |m| m.content.as_str());
    let step = system
        .lines()
        .find_map(|l| l.strip_prefix("guiscout-step:"))
        .map(str::trim)
        .ok_or("system prompt has no guiscout-step marker")?;
    match step {
        "refine" => {
            let sections: Vec<UiSection> = EXAMPLE_SECTIONS
                .iter()
                .map(|(n, d, c)| UiSection { name: n.to_string(), description: d.to_string(), code_example: c.to_string() })
                .collect();
            Ok(format!(
                "Here is the breakdown.\n\n```sections\n{}```\n",
                crate::genkit::render_sections(&sections)
            ))
        }
        "code" => {
            let block = format!("```sections\n{}\n```", user.split_once("\n\n").map_or(user, |(_, b)| b));
            let sections = parse_sections(&block)?;
            let mut html = String::from(
                "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Generated UI</title>\n</head>\n<body>\n",
            );
            for s in &sections {
                let class = s.name.replace(' ', "-");
                html.push_str(&format!(
                    "<div class=\"{class}\" data-section=\"{}\">\n{}\n</div>\n",
                    s.name, s.code_example
                ));
            }
            html.push_str("</body>\n</html>");
            Ok(format!("```html\n{html}\n```"))
        }
        "adjust" => {
            let mut lines = user.lines();
            lines.by_ref().find(|l| l.trim() == "```html").ok_or("no html block in prompt")?;
            let code: Vec<&str> = lines.by_ref().take_while(|l| l.trim() != "```").collect();
            let code = code.join("\n");
            let instruction = user
                .lines()
                .find_map(|l| l.strip_prefix("Instruction:"))
                .map(str::trim)
                .unwrap_or_default();
            let updated = if instruction.to_lowercase().contains("footer") && !code.contains("footer section") {
                match code.rfind("</body>") {
                    Some(at) => format!("{}{FOOTER}\n{}", &code[..at], &code[at..]),
                    None => format!("{code}\n{FOOTER}"),
                }
            } else {
                format!("{code}\n<!-- adjusted: {instruction} -->")
            };
            Ok(format!("```html\n{updated}\n```"))
        }
        other => Err(format!("unknown step `{other}`")),
    }
}

/// A small PNG whose colour depends on the prompt and the image number.
pub fn placeholder_png(prompt: &str, index: usize) -> Vec<u8> {
    let h = guiscout_core::reference::fnv1a64(format!("{prompt}#{index}").as_bytes());
    let img = image::RgbImage::from_fn(8, 8, |x, y| {
        let b = h.rotate_left(x * 8 + y).to_le_bytes();
        image::Rgb([b[0], b[1], b[2]])
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("png encoding to memory");
    out.into_inner()
}

#[derive(Deserialize)]
struct ChatBody {
    messages: Vec<ChatMessage>,
    #[allow(dead_code)]
    temperature: f64,
}

async fn chat(State(state): State<Arc<MockState>>, Json(body): Json<ChatBody>) -> Response {
    state.chat_requests.lock().unwrap().push(body.messages.clone());
    let mode = state.chat_mode.lock().unwrap().clone();
    let (status, content) = match mode {
        ChatMode::Example => match example_reply(&body.messages) {
            Ok(c) => (200, c),
            Err(e) => (400, e),
        },
        ChatMode::Scripted(_) => {
            let mut guard = state.chat_mode.lock().unwrap();
            match &mut *guard {
                ChatMode::Scripted(q) => q.pop_front().unwrap_or((500, "script exhausted".into())),
                ChatMode::Example => unreachable!(),
            }
        }
    };
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    if status.is_success() {
        (status, Json(json!({ "content": content }))).into_response()
    } else {
        (status, Json(json!({ "error": content }))).into_response()
    }
}

#[derive(Deserialize)]
struct ImagesBody {
    prompt: String,
    n: usize,
}

async fn images(State(state): State<Arc<MockState>>, Json(body): Json<ImagesBody>) -> Response {
    let round = {
        let mut rounds = state.image_rounds.lock().unwrap();
        rounds.push(body.n);
        rounds.len() - 1
    };
    if state.failing_image_rounds.contains(&round) {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": "injected failure" }))).into_response();
    }
    let images: Vec<String> = (0..body.n).map(|i| B64.encode(placeholder_png(&body.prompt, round * 1000 + i))).collect();
    Json(json!({ "images": images })).into_response()
}

async fn info(State(state): State<Arc<MockState>>) -> Response {
    Json(json!({ "name": "mock-embedder", "dim": state.advertised_dim, "modality": "multimodal" })).into_response()
}

#[derive(Deserialize)]
struct EmbedBody {
    modality: String,
    items: Vec<String>,
}

async fn embed(State(state): State<Arc<MockState>>, Json(body): Json<EmbedBody>) -> Response {
    *state.embed_calls.lock().unwrap() += 1;
    let result = tokio::task::spawn_blocking(move || -> Result<Vec<Vec<f64>>, String> {
        match body.modality.as_str() {
            "text" => state
                .embedder
                .embed_text(&body.items)
                .map(|v| v.into_iter().map(|e| e.into_values()).collect())
                .map_err(|e| e.to_string()),
            "image" => {
                let inputs = body
                    .items
                    .iter()
                    .map(|b| B64.decode(b).map(ImageInput::Bytes).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                state
                    .embedder
                    .embed_image(&inputs)
                    .map(|v| v.into_iter().map(|e| e.into_values()).collect())
                    .map_err(|e| e.to_string())
            }
            other => Err(format!("unknown modality `{other}`")),
        }
    })
    .await
    .unwrap_or_else(|e| Err(e.to_string()));
    match result {
        Ok(vectors) => Json(json!({ "vectors": vectors })).into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, Json(json!({ "error": e }))).into_response(),
    }
}

/// Routes for all three mock services on one server.
pub fn router(state: Arc<MockState>) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/images", post(images))
        .route("/info", get(info))
        .route("/embed", post(embed))
        .with_state(state)
}

/// An axum router served on a background thread. Dropping it stops the
/// server.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    /// Bind `addr` (port 0 picks a free port) and serve `app`.
    pub fn start(app: Router, addr: SocketAddr) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stopped.await;
                    })
                    .await;
            });
        });
        Ok(BackgroundServer { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// A mock server bound to a free local port, with its state.
pub struct MockServer {
    pub state: Arc<MockState>,
    server: BackgroundServer,
}

impl MockServer {
    pub fn start(state: MockState) -> std::io::Result<Self> {
        let state = Arc::new(state);
        let server = BackgroundServer::start(router(state.clone()), SocketAddr::from(([127, 0, 0, 1], 0)))?;
        Ok(MockServer { state, server })
    }

    pub fn url(&self) -> String {
        self.server.url()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genkit::Templates;

    #[test]
    fn example_mode_walks_the_pipeline() {
        let t = Templates::builtin();
        let reply = example_reply(&t.refine.render(&[("high_level", "health monitoring report")])).unwrap();
        let sections = parse_sections(&reply).unwrap();
        let names: Vec<&str> = sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["header section", "profile section", "summary section", "charts section"]);

        let rendered = crate::genkit::render_sections(&sections);
        let html = example_reply(&t.code.render(&[("sections", rendered.trim_end())])).unwrap();
        let html = crate::genkit::extract_html(&html);
        assert!(names.iter().all(|n| html.contains(n)));

        let adjusted = example_reply(&t.adjust.render(&[("code", &html), ("instruction", "add the footer")])).unwrap();
        let adjusted = crate::genkit::extract_html(&adjusted);
        assert!(adjusted.contains("footer section") && !html.contains("footer section"));
        assert!(adjusted.find(FOOTER).unwrap() < adjusted.find("</body>").unwrap());
    }

    #[test]
    fn missing_marker_is_an_error() {
        assert!(example_reply(&[ChatMessage::new("user", "hi")]).is_err());
    }

    #[test]
    fn placeholder_images_decode() {
        let png = placeholder_png("x", 0);
        assert_eq!(crate::embedder::decode_rgb(&png).unwrap().0, 8);
        assert_ne!(png, placeholder_png("x", 1));
    }
}
