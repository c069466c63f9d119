//! Chat-completion backends: the behavioral contract, an HTTP client for
//! OpenAI-compatible servers, deterministic test doubles, and retry/cache
//! decorators.

mod cache;
mod remote;
mod retry;
mod scripted;

pub use cache::{with_cache, CacheEntry, CacheIssue, CacheMeta, CacheStats, CacheStore, CachedBackend};
pub use remote::RemoteBackend;
pub use retry::{with_retry, RetryBackend, RetryPolicy};
pub use scripted::{ConstantBackend, CountingBackend, HashAnswerBackend, ScriptEntry, ScriptedBackend};

use crate::domain::{ChatMessage, DecodingParams, Role};
use std::time::Duration;
use thiserror::Error;

/// Identifies one conversation. Backends may use it for logging and session
/// accounting; it never affects completion content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for SessionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A chat-completion provider: one prompt in, one completion out.
///
/// Implementations must be safe to call concurrently from evaluation workers.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        (**self).complete(session_id, messages, decoding)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        (**self).complete(session_id, messages, decoding)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        (**self).complete(session_id, messages, decoding)
    }
}

/// Shared request precondition: non-empty, starting with one system message.
pub fn validate_request(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if messages.is_empty() {
        return Err(BackendError::InvalidRequest { detail: "message list is empty".into() });
    }
    if messages[0].role != Role::System {
        return Err(BackendError::InvalidRequest {
            detail: "first message must be a system message".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// Network-level failure (connect, timeout, mid-body). Retryable.
    #[error("transport failure: {detail}")]
    Transport { detail: String },
    /// Server signalled rate limiting. Retryable; `retry_after` overrides backoff.
    #[error("rate limited{}", retry_after.map(|d| format!(" (retry after {}s)", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    /// Non-2xx API response; body preserved for diagnosis. Not retryable.
    #[error("api error, status {status}: {body}")]
    Api { status: u16, body: String },
    /// 2xx response whose body did not parse as a chat completion.
    #[error("malformed response: {detail}")]
    Protocol { detail: String },
    /// The request violated the backend contract.
    #[error("invalid request: {detail}")]
    InvalidRequest { detail: String },
    /// A scripted response's matcher did not match the incoming prompt.
    #[error("scripted backend mismatch: expected a prompt containing {expected:?}, got: {got_preview}")]
    ScriptMismatch { expected: String, got_preview: String },
    /// The script ran out of responses.
    #[error("scripted backend exhausted after {consumed} responses (session {session})")]
    ScriptExhausted { session: String, consumed: usize },
    /// Cache store I/O failure; calls fail rather than silently bypassing.
    #[error("cache store failure at {path}: {detail}")]
    Cache { path: String, detail: String },
    /// All retry attempts consumed; carries the last underlying error.
    #[error("backend exhausted after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<BackendError> },
}

impl BackendError {
    /// Only transport failures and rate limiting warrant a retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. } | BackendError::RateLimited { .. })
    }
}
