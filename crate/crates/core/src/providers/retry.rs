//! Exponential backoff and per-provider in-flight limits.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use tracing::warn;

use super::ProviderError;

/// Relative jitter applied to each backoff delay.
pub const JITTER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: u32, backoff_base: Duration) -> Self {
        Self {
            max_retries,
            backoff_base,
        }
    }

    /// Nominal wait before retry `k` (1-based): `base * 2^(k-1)`.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.saturating_sub(1));
        self.backoff_base.saturating_mul(factor)
    }

    /// Nominal delay scaled by a uniform factor in `[1 - JITTER, 1 + JITTER]`.
    pub fn jittered_delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let scale = rng.random_range(1.0 - JITTER..=1.0 + JITTER);
        self.nominal_delay(retry).mul_f64(scale)
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct ConcurrencyLimit {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limit: &'a ConcurrencyLimit,
}

impl ConcurrencyLimit {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit { limit: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .limit
            .in_flight
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.limit.freed.notify_one();
    }
}

/// Runs an idempotent request with retries.
///
/// Each attempt holds a permit from `limit`; the backoff sleep does not.
/// Non-retryable errors are returned as-is. When retries run out the
/// result is [`ProviderError::Exhausted`] carrying the last cause.
pub fn with_retry<T>(
    provider: &str,
    policy: &RetryPolicy,
    limit: &ConcurrencyLimit,
    mut request: impl FnMut(u32) -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    let mut rng = rand::rng();
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let result = {
            let _permit = limit.acquire();
            request(attempt)
        };
        match result {
            Ok(v) => return Ok(v),
            Err(e) if !e.is_retryable() => return Err(e),
            Err(e) => {
                let retry = attempt;
                if retry > policy.max_retries {
                    return Err(ProviderError::Exhausted {
                        provider: provider.to_string(),
                        attempts: attempt,
                        last: Box::new(e),
                    });
                }
                let delay = policy.jittered_delay(retry, &mut rng);
                warn!(provider, attempt, error = %e, ?delay, "retrying");
                std::thread::sleep(delay);
            }
        }
    }
}
