//! Shared HTTP plumbing for the endpoint clients.
//!
//! All three wire protocols (classifier, completion scorer, translator) are
//! single-POST JSON exchanges, so they share one helper: [`post_json`].
//! Transport-level failures — connection errors, timeouts, and any non-2xx
//! status — are retried with exponential backoff per [`RetryPolicy`] and
//! surface as [`Error::Transport`] once attempts are exhausted. A 2xx
//! response that fails to parse as JSON is a protocol violation and is never
//! retried.

use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};

/// Retry behavior for transport failures.
///
/// Attempt `k` (0-based retry counter) sleeps `base_delay * 2^k` before
/// resending, so the defaults wait 250 ms, 500 ms, and 1 s between the four
/// total attempts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Number of retries after the initial attempt.
    pub max_retries: u32,
    /// Backoff base; doubled for each successive retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// A policy that never retries and never sleeps (useful in tests).
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    /// A fast policy for tests: same retry count as the default but with
    /// microscopic backoff.
    pub fn fast() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
        }
    }
}

/// Build the crate's standard HTTP agent.
///
/// A global per-request timeout keeps a wedged endpoint from hanging a run
/// forever; everything else is ureq's defaults.
pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .new_agent()
}

/// POST `body` as JSON to `url` and parse the JSON response.
///
/// Adds `Authorization: Bearer <token>` when `bearer` is set. Connection
/// failures and non-2xx statuses are retried per `policy`; a successful
/// status with an unparseable body is an immediate [`Error::Protocol`].
pub fn post_json(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &serde_json::Value,
    policy: &RetryPolicy,
) -> Result<serde_json::Value> {
    let attempts = policy.max_retries + 1;
    let mut last_failure = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let backoff = policy.base_delay * 2u32.saturating_pow(attempt - 1);
            if !backoff.is_zero() {
                thread::sleep(backoff);
            }
        }
        let mut request = agent.post(url);
        if let Some(token) = bearer {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        match request.send_json(body) {
            Ok(response) => {
                return response.into_body().read_json().map_err(|e| {
                    Error::Protocol(format!("{url} returned a non-JSON body: {e}"))
                });
            }
            Err(e) => {
                last_failure = match &e {
                    ureq::Error::StatusCode(code) => format!("HTTP status {code}"),
                    other => other.to_string(),
                };
            }
        }
    }
    Err(Error::Transport {
        url: url.to_string(),
        attempts,
        message: last_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_policy_matches_documented_backoff() {
        let p = RetryPolicy::default();
        assert_eq!(p.max_retries, 3);
        assert_eq!(p.base_delay, Duration::from_millis(250));
    }

    #[test]
    fn connection_refused_exhausts_retries() {
        // Port 1 on localhost is essentially guaranteed closed.
        let agent = agent();
        let err = post_json(
            &agent,
            "http://127.0.0.1:1/predict",
            None,
            &serde_json::json!({"text": "x"}),
            &RetryPolicy {
                max_retries: 2,
                base_delay: Duration::ZERO,
            },
        )
        .unwrap_err();
        match err {
            Error::Transport { attempts, url, .. } => {
                assert_eq!(attempts, 3);
                assert!(url.contains("/predict"));
            }
            other => panic!("expected transport error, got {other}"),
        }
    }
}
