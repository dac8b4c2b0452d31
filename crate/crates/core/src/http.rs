//! Minimal JSON-over-HTTP POST shared by the remote classifier and the LLM
//! backend.

use std::time::Duration;

use serde::Serialize;

#[derive(Debug)]
pub(crate) enum PostError {
    /// Connection refused, DNS failure, timeout, broken body read.
    Transport(String),
}

pub(crate) struct PostResponse {
    pub status: u16,
    pub body: String,
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn post_json<T: Serialize>(
    agent: &ureq::Agent,
    url: &str,
    body: &T,
    bearer: Option<&str>,
) -> Result<PostResponse, PostError> {
    let mut request = agent.post(url);
    if let Some(token) = bearer {
        request = request.header("Authorization", &format!("Bearer {token}"));
    }
    let mut response = request
        .send_json(body)
        .map_err(|e| PostError::Transport(e.to_string()))?;
    let status = response.status().as_u16();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| PostError::Transport(e.to_string()))?;
    Ok(PostResponse { status, body })
}
