use serde::{Deserialize, Serialize};

/// Exponential backoff: `base * 2^(attempt-1)`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    #[serde(default = "default_cap")]
    pub max_backoff_ms: u64,
}

fn default_cap() -> u64 {
    60_000
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 500,
            max_backoff_ms: default_cap(),
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt number `attempt` (1-based).
    pub fn backoff_ms(&self, attempt: u32) -> u64 {
        let shift = attempt.saturating_sub(1).min(32);
        self.backoff_base_ms
            .saturating_mul(1u64 << shift)
            .min(self.max_backoff_ms)
    }
}

/// Token bucket admitting `per_minute` requests per minute with bursts of up
/// to `burst`. Time is passed in by the caller, in milliseconds.
///
/// Token amounts are kept in units of 1/60000 of a request-minute so refill
/// is exact integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBucket {
    per_minute: u64,
    capacity: u64,
    level: u64,
    last_ms: u64,
}

const UNIT: u64 = 60_000;

impl TokenBucket {
    pub fn new(per_minute: u32, burst: u32, now_ms: u64) -> Self {
        let per_minute = u64::from(per_minute.max(1));
        let capacity = u64::from(burst.max(1)) * UNIT;
        TokenBucket {
            per_minute,
            capacity,
            level: capacity,
            last_ms: now_ms,
        }
    }

    fn refill(&mut self, now_ms: u64) {
        if now_ms > self.last_ms {
            let gained = (now_ms - self.last_ms).saturating_mul(self.per_minute);
            self.level = self.level.saturating_add(gained).min(self.capacity);
            self.last_ms = now_ms;
        }
    }

    /// Reserve one request and return the time at which it may be sent.
    pub fn reserve(&mut self, now_ms: u64) -> u64 {
        self.refill(now_ms);
        let now = now_ms.max(self.last_ms);
        if self.level >= UNIT {
            self.level -= UNIT;
            return now;
        }
        let missing = UNIT - self.level;
        let wait = missing.div_ceil(self.per_minute);
        let at = now + wait;
        self.refill(at);
        self.level -= UNIT;
        at
    }
}
