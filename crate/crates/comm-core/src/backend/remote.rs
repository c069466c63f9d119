//! Blocking HTTP client for OpenAI-compatible chat-completions servers.

use super::{validate_request, BackendError, ChatBackend, SessionId};
use crate::domain::{ChatMessage, DecodingParams, Role};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Talks to any server exposing `POST {base_url}/chat/completions`.
///
/// The credential is sent as a bearer token when present and never appears in
/// errors, logs, transcripts, or cache entries.
pub struct RemoteBackend {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport { detail: format!("client build: {e}") })?;
        Ok(RemoteBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    content: Option<String>,
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

fn parse_retry_after(response: &reqwest::blocking::Response) -> Option<Duration> {
    response
        .headers()
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(Duration::from_secs)
}

impl ChatBackend for RemoteBackend {
    fn complete(
        &self,
        _session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        validate_request(messages)?;
        let body = WireRequest {
            model: &decoding.model_id,
            messages: messages
                .iter()
                .map(|m| WireMessage { role: role_name(m.role), content: &m.content })
                .collect(),
            temperature: decoding.temperature,
            max_tokens: decoding.max_tokens,
        };
        let mut request = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Transport {
            detail: if e.is_timeout() { "request timed out".into() } else { e.to_string() },
        })?;

        let status = response.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited { retry_after: parse_retry_after(&response) });
        }
        if status.is_server_error() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Transport {
                detail: format!("server error {status}: {body}"),
            });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Api { status: status.as_u16(), body });
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| BackendError::Protocol { detail: format!("bad completion body: {e}") })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol { detail: "response carried no choices".into() })
    }
}
