//! Deterministic test doubles: scripted FIFO responses, a pure hash-based
//! responder, a constant responder, and a call-counting wrapper.

use super::{validate_request, BackendError, ChatBackend, SessionId};
use crate::domain::{ChatMessage, DecodingParams};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// One scripted response, optionally guarded by a substring matcher that the
/// incoming prompt must contain.
#[derive(Debug, Clone, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub matcher: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn new(response: impl Into<String>) -> Self {
        ScriptEntry { matcher: None, response: response.into() }
    }

    pub fn matching(matcher: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptEntry { matcher: Some(matcher.into()), response: response.into() }
    }
}

/// An append-only record of one backend call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedCall {
    pub session_id: String,
    pub messages: Vec<ChatMessage>,
}

/// Replays pre-authored responses FIFO, logging every call it receives.
///
/// A mismatch between a matcher and the incoming prompt fails loudly rather
/// than returning the wrong line, so sequencing bugs surface immediately.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<ScriptEntry>>,
    log: Mutex<Vec<LoggedCall>>,
    consumed: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        ScriptedBackend {
            script: Mutex::new(entries.into_iter().collect()),
            log: Mutex::new(Vec::new()),
            consumed: AtomicU64::new(0),
        }
    }

    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(responses.into_iter().map(|r| ScriptEntry::new(r)))
    }

    /// Loads a script from a JSON-lines file of `{"matcher": ..., "response": ...}`
    /// records (matcher optional; `#` lines and blanks ignored).
    pub fn from_jsonl_path(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path).map_err(|e| BackendError::InvalidRequest {
            detail: format!("cannot read script {}: {e}", path.display()),
        })?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(trimmed).map_err(|e| BackendError::InvalidRequest {
                    detail: format!("script {} line {}: {e}", path.display(), i + 1),
                })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    /// Every call received so far, in order.
    pub fn log(&self) -> Vec<LoggedCall> {
        self.log.lock().expect("log lock").clone()
    }

    /// Distinct session ids in first-seen order.
    pub fn session_ids(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for call in self.log.lock().expect("log lock").iter() {
            if !seen.contains(&call.session_id) {
                seen.push(call.session_id.clone());
            }
        }
        seen
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("log lock").len()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("script lock").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        _decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        validate_request(messages)?;
        self.log
            .lock()
            .expect("log lock")
            .push(LoggedCall { session_id: session_id.to_string(), messages: messages.to_vec() });
        let entry = self
            .script
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| BackendError::ScriptExhausted {
                session: session_id.to_string(),
                consumed: self.consumed.load(Ordering::SeqCst) as usize,
            })?;
        self.consumed.fetch_add(1, Ordering::SeqCst);
        if let Some(matcher) = &entry.matcher {
            let prompt_text =
                messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
            if !prompt_text.contains(matcher.as_str()) {
                let preview: String = prompt_text.chars().take(160).collect();
                return Err(BackendError::ScriptMismatch {
                    expected: matcher.clone(),
                    got_preview: preview,
                });
            }
        }
        Ok(entry.response)
    }
}

/// A pure function of the request: hashes the messages and answers with a
/// deterministic label. Order- and session-independent, so it stays
/// deterministic under parallel evaluation and problem shuffling.
#[derive(Debug, Clone)]
pub struct HashAnswerBackend {
    labels: Vec<char>,
    salt: String,
}

impl HashAnswerBackend {
    pub fn new(labels: impl IntoIterator<Item = char>) -> Self {
        HashAnswerBackend { labels: labels.into_iter().collect(), salt: String::new() }
    }

    pub fn with_salt(mut self, salt: impl Into<String>) -> Self {
        self.salt = salt.into();
        self
    }
}

impl ChatBackend for HashAnswerBackend {
    fn complete(
        &self,
        _session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        validate_request(messages)?;
        let mut hasher = Sha256::new();
        hasher.update(self.salt.as_bytes());
        hasher.update(decoding.model_id.as_bytes());
        for m in messages {
            hasher.update([0u8]);
            hasher.update(m.content.as_bytes());
        }
        let digest = hasher.finalize();
        let label = self.labels[digest[0] as usize % self.labels.len()];
        Ok(format!(
            "Deterministic reasoning over a {}-byte prompt. The answer is ({label}).",
            messages.iter().map(|m| m.content.len()).sum::<usize>()
        ))
    }
}

/// Always returns the same completion.
#[derive(Debug, Clone)]
pub struct ConstantBackend(pub String);

impl ChatBackend for ConstantBackend {
    fn complete(
        &self,
        _session_id: &SessionId,
        messages: &[ChatMessage],
        _decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        validate_request(messages)?;
        Ok(self.0.clone())
    }
}

/// Wraps a backend and counts delegate calls; used to prove cache hits issue
/// zero remote calls.
#[derive(Debug)]
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicU64,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ChatBackend> ChatBackend for CountingBackend<B> {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(session_id, messages, decoding)
    }
}
