use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, EmotionClassifier, EmotionLabel, EmotionPrediction};
use crate::http::{self, PostError};

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    label: String,
    confidence: f64,
}

/// Client for an external emotion model.
///
/// Wire protocol: `POST <endpoint>` with `{"text": ...}`, expecting
/// `{"label": <one of the 7 labels>, "confidence": <0..=1>}`. Replies outside
/// that schema are reported as [`ClassifyError::MalformedResponse`], never
/// coerced.
pub struct RemoteClassifier {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteClassifier {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: http::agent(timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl EmotionClassifier for RemoteClassifier {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, ClassifyError> {
        let response = http::post_json(&self.agent, &self.endpoint, &ClassifyRequest { text }, None)
            .map_err(|PostError::Transport(msg)| ClassifyError::RemoteUnavailable(msg))?;
        if !(200..300).contains(&response.status) {
            return Err(ClassifyError::RemoteUnavailable(format!(
                "HTTP status {}",
                response.status
            )));
        }
        parse_reply(&response.body)
    }
}

fn parse_reply(body: &str) -> Result<EmotionPrediction, ClassifyError> {
    let reply: ClassifyResponse =
        serde_json::from_str(body).map_err(|e| ClassifyError::MalformedResponse(e.to_string()))?;
    let label: EmotionLabel = reply
        .label
        .parse()
        .map_err(|e: super::UnknownLabel| ClassifyError::MalformedResponse(e.to_string()))?;
    EmotionPrediction::new(label, reply.confidence)
        .ok_or_else(|| ClassifyError::MalformedResponse(format!("confidence {} outside [0, 1]", reply.confidence)))
}
