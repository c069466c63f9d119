//! Exponential-backoff retry decorator for transient backend failures.

use super::{BackendError, ChatBackend, SessionId};
use crate::domain::{ChatMessage, DecodingParams};
use std::time::Duration;

/// Backoff schedule: attempt n (1-based) sleeps `base_delay * multiplier^(n-1)`
/// before retrying, unless the server supplied a retry-after hint.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(500), multiplier: 2.0 }
    }
}

impl RetryPolicy {
    pub fn delay_for_attempt(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.powi(attempt.saturating_sub(1) as i32);
        self.base_delay.mul_f64(factor.max(0.0))
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Retries only transport and rate-limit errors; everything else propagates
/// immediately. Rate-limit retry-after hints override the computed backoff.
pub struct RetryBackend<B> {
    inner: B,
    policy: RetryPolicy,
    sleeper: Sleeper,
}

/// Wraps `backend` so transient failures are retried per `policy`.
pub fn with_retry<B: ChatBackend>(backend: B, policy: RetryPolicy) -> RetryBackend<B> {
    RetryBackend::new(backend, policy)
}

impl<B> RetryBackend<B> {
    pub fn new(inner: B, policy: RetryPolicy) -> Self {
        assert!(policy.max_attempts >= 1, "retry policy needs at least one attempt");
        RetryBackend { inner, policy, sleeper: Box::new(|d| std::thread::sleep(d)) }
    }

    /// Replaces the sleep function; tests use this to avoid real delays.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for RetryBackend<B> {
    fn complete(
        &self,
        session_id: &SessionId,
        messages: &[ChatMessage],
        decoding: &DecodingParams,
    ) -> Result<String, BackendError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.inner.complete(session_id, messages, decoding) {
                Ok(text) => return Ok(text),
                Err(err) if err.is_retryable() && attempt < self.policy.max_attempts => {
                    let delay = match &err {
                        BackendError::RateLimited { retry_after: Some(hint) } => *hint,
                        _ => self.policy.delay_for_attempt(attempt),
                    };
                    (self.sleeper)(delay);
                }
                Err(err) if err.is_retryable() => {
                    return Err(BackendError::Exhausted { attempts: attempt, last: Box::new(err) });
                }
                Err(err) => return Err(err),
            }
        }
    }
}
