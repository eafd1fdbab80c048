mod common;

use std::net::SocketAddr;
use std::sync::Arc;

use base64::Engine as _;
use guiscout::genkit::Generator;
use guiscout::mock::{BackgroundServer, MockServer, MockState};
use guiscout::service::{router, Engine, SearchResponse, Session};
use guiscout_core::reference::ReferenceRecipe;
use serde_json::{json, Value};

use common::{engine, DIM, SEED};

struct Api {
    _server: BackgroundServer,
    base: String,
    agent: ureq::Agent,
}

impl Api {
    fn start(engine: Arc<Engine>) -> Self {
        let server = BackgroundServer::start(router(engine), SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Api { base: server.url(), _server: server, agent }
    }

    fn read(resp: ureq::http::Response<ureq::Body>) -> (u16, String) {
        let status = resp.status().as_u16();
        (status, resp.into_body().read_to_string().unwrap())
    }

    fn get(&self, path: &str) -> (u16, String) {
        Self::read(self.agent.get(format!("{}{path}", self.base)).call().unwrap())
    }

    fn post(&self, path: &str, body: Value) -> (u16, String) {
        Self::read(self.agent.post(format!("{}{path}", self.base)).send_json(body).unwrap())
    }

    fn delete(&self, path: &str) -> (u16, String) {
        Self::read(self.agent.delete(format!("{}{path}", self.base)).call().unwrap())
    }
}

fn error_code(body: &str) -> String {
    serde_json::from_str::<Value>(body).unwrap()["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn search_ranks_health_screens_like_a_brute_force_scan() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let (status, body) = api.post("/search", json!({"text": "Health Monitoring Report", "k": 5}));
    assert_eq!(status, 200, "{body}");
    let resp: SearchResponse = serde_json::from_str(&body).unwrap();
    let got: Vec<&str> = resp.hits.iter().map(|h| h.id.as_str()).collect();

    // Independent oracle: embed every distinct fixture image from its file
    // with the core recipe and sort by cosine.
    let recipe = ReferenceRecipe::new(DIM, SEED);
    let q = recipe.embed_text("Health Monitoring Report").unwrap();
    let mut scored: Vec<(f64, String)> = (1..=17)
        .map(|n| {
            let path = root.path().join(format!("fixture/images/screen-{n:03}.png"));
            let img = image::open(path).unwrap().to_rgb8();
            let e = recipe.embed_rgb(img.width() as usize, img.height() as usize, img.as_raw()).unwrap();
            (guiscout_core::cosine(&q, &e).unwrap(), format!("screen-{n:03}"))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let want: Vec<&str> = scored.iter().take(5).map(|(_, id)| id.as_str()).collect();
    assert_eq!(got, want);
    let mut top3 = got[..3].to_vec();
    top3.sort();
    assert_eq!(top3, ["screen-001", "screen-002", "screen-003"]);
    for (h, (s, _)) in resp.hits.iter().zip(&scored) {
        assert!((h.score - s).abs() < 1e-6);
    }
    assert_eq!(resp.hits[0].record.app_id, "vitalis");
}

#[test]
fn identical_requests_get_identical_bytes() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let req = json!({"text": "shopping cart checkout", "k": 6, "filters": {"platform": ["web", "ios"]}});
    let a = api.post("/search", req.clone());
    let b = api.post("/search", req);
    assert_eq!(a.0, 200);
    assert_eq!(a.1, b.1);
}

#[test]
fn filters_min_score_and_bad_requests() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let (_, body) = api.post("/search", json!({"text": "screen", "k": 10, "filters": {"platform": ["android"]}}));
    let resp: SearchResponse = serde_json::from_str(&body).unwrap();
    assert!(!resp.hits.is_empty());
    assert!(resp.hits.iter().all(|h| h.record.platform.as_str() == "android"));
    let ranks: Vec<usize> = resp.hits.iter().map(|h| h.rank).collect();
    assert_eq!(ranks, (1..=resp.hits.len()).collect::<Vec<_>>());

    let (_, body) = api.post("/search", json!({"text": "Health Monitoring Report", "k": 17, "min_score": 0.2}));
    let resp: SearchResponse = serde_json::from_str(&body).unwrap();
    assert!(!resp.hits.is_empty() && resp.hits.len() < 17);
    assert!(resp.hits.iter().all(|h| h.score >= 0.2));

    let (status, body) = api.post("/search", json!({"text": "x", "filters": {"color": ["red"]}}));
    assert_eq!((status, error_code(&body).as_str()), (400, "bad_request"));
    let (status, body) = api.post("/search", json!({"text": "   "}));
    assert_eq!((status, error_code(&body).as_str()), (400, "invalid_query"));
    let (status, _) = api.post("/search", json!({"text": "x", "k": 0}));
    assert_eq!(status, 400);
}

#[test]
fn records_apps_images_and_health() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let (status, body) = api.get("/records/screen-004");
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["caption"], "Medication reminder list with dosage times");
    let (status, body) = api.get("/records/nope");
    assert_eq!((status, error_code(&body).as_str()), (404, "not_found"));

    let (_, body) = api.get("/apps/vitalis");
    let screens = serde_json::from_str::<Value>(&body).unwrap()["screens"].as_array().unwrap().len();
    assert_eq!(screens, 3);
    assert_eq!(api.get("/apps/unknown").0, 404);

    let resp = api.agent.get(format!("{}/images/screen-001", api.base)).call().unwrap();
    assert_eq!(resp.headers()["content-type"], "image/png");

    let (_, body) = api.get("/healthz");
    let h: Value = serde_json::from_str(&body).unwrap();
    assert_eq!((h["corpus_size"].as_u64(), h["generation"].as_u64()), (Some(17), Some(1)));
}

#[test]
fn classify_over_http() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let png = std::fs::read(root.path().join("fixture/images/screen-011.png")).unwrap();
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    let labels = ["health monitoring report", "music player with album art", "login form"];
    let (status, body) = api.post("/classify", json!({"image_b64": b64, "labels": labels}));
    assert_eq!(status, 200, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["label"], "music player with album art");
    let total: f64 = v["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let (status, body) = api.post("/classify", json!({"image_b64": b64, "labels": ["a", "a"]}));
    assert_eq!((status, error_code(&body).as_str()), (400, "invalid_labels"));
    let (status, body) = api.post("/classify", json!({"image_b64": "aGVsbG8=", "labels": ["a"]}));
    assert_eq!((status, error_code(&body).as_str()), (400, "decode_failure"));
}

#[test]
fn sessions_round_trip_and_persist() {
    let root = tempfile::tempdir().unwrap();
    let id = {
        let engine = engine(root.path());
        let api = Api::start(engine.clone());
        let (status, body) = api.post("/sessions", json!({}));
        assert_eq!(status, 201);
        let s: Session = serde_json::from_str(&body).unwrap();
        let id = s.session_id;
        assert_eq!(api.post(&format!("/sessions/{id}/queries"), json!({"text": "login"})).0, 200);
        assert_eq!(api.post(&format!("/sessions/{id}/queries"), json!({"text": "chat"})).0, 200);
        for _ in 0..2 {
            assert_eq!(api.post(&format!("/sessions/{id}/pins"), json!({"record_id": "screen-006"})).0, 200);
        }
        let (status, body) = api.post(&format!("/sessions/{id}/pins"), json!({"record_id": "ghost"}));
        assert_eq!((status, error_code(&body).as_str()), (404, "unknown_record"));
        let (status, body) = api.post("/sessions/missing/pins", json!({"record_id": "screen-006"}));
        assert_eq!((status, error_code(&body).as_str()), (404, "unknown_session"));
        let (_, body) = api.get(&format!("/sessions/{id}"));
        let s: Session = serde_json::from_str(&body).unwrap();
        assert_eq!(s.pins, vec!["screen-006"]);
        let texts: Vec<&str> = s.query_history.iter().map(|e| e.query.text.as_str()).collect();
        assert_eq!(texts, ["login", "chat"]);
        assert!(s.query_history[0].timestamp_ms < s.query_history[1].timestamp_ms);
        engine.sessions().flush().unwrap();
        id
    };
    let engine = Engine::open(&root.path().join("index"), Arc::new(common::embedder())).unwrap();
    let api = Api::start(Arc::new(engine));
    let (_, body) = api.get(&format!("/sessions/{id}"));
    let s: Session = serde_json::from_str(&body).unwrap();
    assert_eq!((s.pins.len(), s.query_history.len()), (1, 2));
    let (_, body) = api.delete(&format!("/sessions/{id}/pins/screen-006"));
    assert!(serde_json::from_str::<Session>(&body).unwrap().pins.is_empty());
}

#[test]
fn reload_bumps_the_generation() {
    let root = tempfile::tempdir().unwrap();
    let engine = engine(root.path());
    assert_eq!(engine.reload().unwrap(), 2);
    assert_eq!(engine.health().generation, 2);
}

#[test]
fn generate_routes_proxy_to_the_model_server() {
    let root = tempfile::tempdir().unwrap();
    let mock = MockServer::start(MockState::new(DIM, SEED)).unwrap();
    let engine = Engine::open(&root.path().join("index"), Arc::new(common::embedder()));
    assert!(engine.is_err(), "no corpus yet");
    common::ingested(root.path());
    let engine = Engine::open(&root.path().join("index"), Arc::new(common::embedder()))
        .unwrap()
        .with_generator(Generator::default(), mock.url());
    let api = Api::start(Arc::new(engine));

    let (status, body) = api.post("/generate/refine", json!({"high_level": "health monitoring report"}));
    assert_eq!(status, 200, "{body}");
    let r: Value = serde_json::from_str(&body).unwrap();
    let (status, body) = api.post("/generate/code", json!({"sections": r["sections"], "provenance": r["provenance"]}));
    assert_eq!(status, 200, "{body}");
    let art: Value = serde_json::from_str(&body).unwrap();
    let (status, body) = api.post("/generate/adjust", json!({"artifact": art, "instruction": "add the footer"}));
    assert_eq!(status, 200);
    let adjusted: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(adjusted["provenance"].as_array().unwrap().len(), 3);

    let before = mock.state.total_calls();
    let (status, body) = api.post("/generate/refine", json!({"high_level": "x", "temperature": 2.5}));
    assert_eq!((status, error_code(&body).as_str()), (400, "invalid_config"));
    assert_eq!(mock.state.total_calls(), before);

    let (status, body) = api.post("/generate/images", json!({"page_description": "login", "n": 5, "batch_size": 2}));
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["rounds"].as_array().unwrap().len(), 3);
}

#[test]
fn generate_routes_without_a_model_server_are_unavailable() {
    let root = tempfile::tempdir().unwrap();
    let api = Api::start(engine(root.path()));
    let (status, body) = api.post("/generate/refine", json!({"high_level": "x"}));
    assert_eq!((status, error_code(&body).as_str()), (503, "generation_unavailable"));
}
