//! Crate-wide error and result types.
//!
//! Every fallible public function in this crate returns [`Result`]. Variants
//! are grouped by failure domain so callers can match on what went wrong
//! without string-sniffing: configuration problems, dataset ingestion
//! problems, transport failures (retries exhausted), protocol violations
//! (endpoint answered but with a malformed or incomplete payload), metrics
//! that are undefined on the given input, and plain invalid arguments.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the whole crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The run configuration is structurally valid but semantically wrong
    /// (missing model fields, non-increasing tier thresholds, bad prompt
    /// template, unknown label, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A dataset file could not be ingested. `line` is 1-based and refers to
    /// the physical line (JSONL) or the data row (CSV) that failed.
    #[error("dataset error at {path}:{line}: {message}")]
    Dataset {
        /// File that failed to ingest.
        path: PathBuf,
        /// 1-based line or row number.
        line: usize,
        /// What was wrong with it.
        message: String,
    },

    /// An HTTP request kept failing after all retries (connection refused,
    /// timeout, or a non-2xx status on every attempt).
    #[error("transport error for {url} after {attempts} attempt(s): {message}")]
    Transport {
        /// Endpoint that was contacted.
        url: String,
        /// Total attempts made (initial try plus retries).
        attempts: u32,
        /// Description of the last failure.
        message: String,
    },

    /// The endpoint responded with 2xx but the payload violates the wire
    /// protocol (missing label, missing candidate score, non-finite
    /// probability, empty translation, ...). Protocol errors are never
    /// retried: the server is reachable but speaking the wrong language.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A metric was requested on input where it has no defined value
    /// (for example a conditional rate over an empty subset).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// A function precondition was violated by the caller.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Underlying I/O failure (file system, sockets owned by us).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure outside dataset ingestion.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
