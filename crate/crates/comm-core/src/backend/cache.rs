//! Content-addressed on-disk completion cache: one file per entry named by the
//! request digest, with a JSON sidecar holding the request for verification.

use super::{BackendError, ChatBackend, SessionId};
use crate::domain::{ChatMessage, DecodingParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

const META_SUFFIX: &str = ".meta.json";

/// Request fields that define a cache key, in canonical serialized order.
///
/// Author attributions are excluded: they are transcript metadata, not part of
/// what the server sees. Credentials are never part of a key or an entry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheMeta {
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub messages: Vec<WireShape>,
    #[serde(default)]
    pub created_at_unix: u64,
}

/// The wire-visible part of one message.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct WireShape {
    pub role: String,
    pub content: String,
}

impl CacheMeta {
    fn from_request(messages: &[ChatMessage], decoding: &DecodingParams) -> Self {
        CacheMeta {
            model_id: decoding.model_id.clone(),
            temperature: decoding.temperature,
            max_tokens: decoding.max_tokens,
            messages: messages
                .iter()
                .map(|m| WireShape {
                    role: match m.role {
                        crate::domain::Role::System => "system".into(),
                        crate::domain::Role::User => "user".into(),
                        crate::domain::Role::Assistant => "assistant".into(),
                    },
                    content: m.content.clone(),
                })
                .collect(),
            created_at_unix: 0,
        }
    }

    /// The content digest; excludes `created_at_unix` so re-digesting a stored
    /// sidecar reproduces the filename.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct KeyView<'a> {
            model_id: &'a str,
            temperature: f64,
            max_tokens: Option<u32>,
            messages: &'a [WireShape],
        }
        let view = KeyView {
            model_id: &self.model_id,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            messages: &self.messages,
        };
        let bytes = serde_json::to_vec(&view).expect("cache key serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// One stored entry: digest key, completion text, and request metadata.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub key: String,
    pub completion: String,
    pub meta: CacheMeta,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

/// A problem found by `verify`.
#[derive(Debug, Clone)]
pub struct CacheIssue {
    pub key: String,
    pub detail: String,
}

/// Directory of completion files keyed by request digest.
///
/// Writes go to a temp file in the same directory followed by an atomic
/// rename, so concurrent identical misses race benignly (last write wins with
/// identical bytes).
#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

impl CacheStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Cache {
            path: dir.display().to_string(),
            detail: format!("cannot create cache dir: {e}"),
        })?;
        Ok(CacheStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The digest key for one request.
    pub fn key_for(messages: &[ChatMessage], decoding: &DecodingParams) -> String {
        CacheMeta::from_request(messages, decoding).digest()
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    fn meta_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}{META_SUFFIX}"))
    }

    fn cache_err(&self, detail: impl std::fmt::Display) -> BackendError {
        BackendError::Cache { path: self.dir.display().to_string(), detail: detail.to_string() }
    }

    /// Reads a completion by key; absent entries are `None`.
    pub fn load(&self, key: &str) -> Result<Option<String>, BackendError> {
        match std::fs::read_to_string(self.entry_path(key)) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(self.cache_err(format!("cannot read entry {key}: {e}"))),
        }
    }

    /// Persists a completion and its request sidecar atomically.
    pub fn store(
        &self,
        key: &str,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
        completion: &str,
    ) -> Result<(), BackendError> {
        let mut meta = CacheMeta::from_request(messages, decoding);
        meta.created_at_unix =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta_json = serde_json::to_string_pretty(&meta)
            .map_err(|e| self.cache_err(format!("cannot serialize sidecar: {e}")))?;
        self.write_atomic(&self.entry_path(key), completion.as_bytes())?;
        self.write_atomic(&self.meta_path(key), meta_json.as_bytes())?;
        Ok(())
    }

    fn write_atomic(&self, target: &Path, bytes: &[u8]) -> Result<(), BackendError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| self.cache_err(format!("cannot create temp file: {e}")))?;
        tmp.write_all(bytes)
            .map_err(|e| self.cache_err(format!("cannot write temp file: {e}")))?;
        tmp.persist(target)
            .map_err(|e| self.cache_err(format!("cannot persist {}: {e}", target.display())))?;
        Ok(())
    }

    /// All entry keys, sorted for stable output.
    pub fn keys(&self) -> Result<Vec<String>, BackendError> {
        let mut keys = Vec::new();
        let entries = std::fs::read_dir(&self.dir)
            .map_err(|e| self.cache_err(format!("cannot list cache dir: {e}")))?;
        for entry in entries {
            let entry = entry.map_err(|e| self.cache_err(format!("cannot read dir entry: {e}")))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.ends_with(META_SUFFIX) && entry.path().is_file() {
                keys.push(name);
            }
        }
        keys.sort();
        Ok(keys)
    }

    pub fn stats(&self) -> Result<CacheStats, BackendError> {
        let mut stats = CacheStats::default();
        for key in self.keys()? {
            stats.entries += 1;
            if let Ok(meta) = std::fs::metadata(self.entry_path(&key)) {
                stats.bytes += meta.len();
            }
        }
        Ok(stats)
    }

    /// Removes every entry and sidecar; returns the number of entries removed.
    pub fn clear(&self) -> Result<usize, BackendError> {
        let keys = self.keys()?;
        for key in &keys {
            for path in [self.entry_path(key), self.meta_path(key)] {
                match std::fs::remove_file(&path) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => {
                        return Err(
                            self.cache_err(format!("cannot remove {}: {e}", path.display()))
                        );
                    }
                }
            }
        }
        Ok(keys.len())
    }

    /// Re-digests every sidecar and reports entries whose filename no longer
    /// matches its request content, plus unreadable or orphaned files.
    pub fn verify(&self) -> Result<Vec<CacheIssue>, BackendError> {
        let mut issues = Vec::new();
        for key in self.keys()? {
            if std::fs::read_to_string(self.entry_path(&key)).is_err() {
                issues.push(CacheIssue { key: key.clone(), detail: "unreadable entry".into() });
                continue;
            }
            let meta_raw = match std::fs::read_to_string(self.meta_path(&key)) {
                Ok(raw) => raw,
                Err(_) => {
                    issues.push(CacheIssue { key, detail: "missing sidecar".into() });
                    continue;
                }
            };
            let meta: CacheMeta = match serde_json::from_str(&meta_raw) {
                Ok(meta) => meta,
                Err(e) => {
                    issues.push(CacheIssue { key, detail: format!("corrupt sidecar: {e}") });
                    continue;
                }
            };
            let recomputed = meta.digest();
            if recomputed != key {
                issues.push(CacheIssue {
                    key,
                    detail: format!("digest mismatch: sidecar re-digests to {recomputed}"),
                });
            }
        }
        Ok(issues)
    }

    pub fn entry(&self, key: &str) -> Result<Option<CacheEntry>, BackendError> {
        let Some(completion) = self.load(key)? else { return Ok(None) };
        let meta_raw = std::fs::read_to_string(self.meta_path(key))
            .map_err(|e| self.cache_err(format!("missing sidecar for {key}: {e}")))?;
        let meta = serde_json::from_str(&meta_raw)
            .map_err(|e| self.cache_err(format!("corrupt sidecar for {key}: {e}")))?;
        Ok(Some(CacheEntry { key: key.to_string(), completion, meta }))
    }
}

/// Read-through cache decorator: hit → stored text with no delegate call;
/// miss → delegate, persist, then return.
pub struct CachedBackend<B> {
    inner: B,
    store: CacheStore,
    read_through_on_error: bool,
}

/// Wraps `backend` with the on-disk cache at `store`.
pub fn with_cache<B: ChatBackend>(backend: B, store: CacheStore) -> CachedBackend<B> {
    CachedBackend { inner: backend, store, read_through_on_error: false }
}

impl<B> CachedBackend<B> {
    /// Degrade to a plain delegate call when the store fails, instead of
    /// failing the completion. Off by default: a broken cache should be loud.
    pub fn read_through_on_error(mut self, enabled: bool) -> Self {
        self.read_through_on_error = enabled;
        self
    }

    pub fn store(&self) -> &CacheStore {
        &self.store
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for CachedBackend<B> {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        let key = CacheStore::key_for(messages, decoding);
        match self.store.load(&key) {
            Ok(Some(text)) => return Ok(text),
            Ok(None) => {}
            Err(e) if self.read_through_on_error => {
                let _ = e;
                return self.inner.complete(session_id, messages, decoding);
            }
            Err(e) => return Err(e),
        }
        let completion = self.inner.complete(session_id, messages, decoding)?;
        match self.store.store(&key, messages, decoding, &completion) {
            Ok(()) => Ok(completion),
            Err(_) if self.read_through_on_error => Ok(completion),
            Err(e) => Err(e),
        }
    }
}
