//! Small blocking JSON-over-HTTP helpers for talking to model endpoints.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

/// Upper bound on a single response body (base64 image batches are large).
const MAX_BODY: u64 = 512 * 1024 * 1024;

pub fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub fn join(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

fn read<T: DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<T, String> {
    let status = resp.status();
    let body = resp
        .body_mut()
        .with_config()
        .limit(MAX_BODY)
        .read_to_string()
        .map_err(|e| format!("reading response: {e}"))?;
    if !status.is_success() {
        let excerpt: String = body.chars().take(200).collect();
        return Err(format!("HTTP {status}: {excerpt}"));
    }
    serde_json::from_str(&body).map_err(|e| format!("malformed reply: {e}"))
}

pub fn get_json<T: DeserializeOwned>(agent: &Agent, url: &str) -> Result<T, String> {
    read(agent.get(url).call().map_err(|e| e.to_string())?)
}

pub fn post_json<T: DeserializeOwned>(agent: &Agent, url: &str, body: &impl Serialize) -> Result<T, String> {
    read(agent.post(url).send_json(body).map_err(|e| e.to_string())?)
}
