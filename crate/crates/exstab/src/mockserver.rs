//! In-process mock HTTP endpoints for tests and examples.
//!
//! [`MockEndpoints`] serves the three wire protocols this crate speaks —
//! `POST /predict`, `POST /score_labels`, and `POST /translate` — from a
//! background thread on an ephemeral localhost port, backed by a [`ToyModel`]
//! and word-substitution dictionaries. It exists so the HTTP clients and the
//! full pipeline can be exercised end to end without any external service.
//!
//! Failure injection (`fail_next`) answers the next *n* requests with
//! HTTP 500, which is how the retry/backoff path is tested.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};

use crate::error::{Error, Result};
use crate::modelclient::{TextClassifier, ToyModel};

/// Fraction of completion probability mass the mock leaves on the label
/// candidates. Real completion endpoints spread mass over the whole
/// vocabulary, so candidate log-probabilities never sum to 1; the client is
/// expected to renormalize. Keeping this below 1 makes the tests prove that.
pub const MOCK_VOCAB_MASS: f64 = 0.8;

struct CompletionBehavior {
    toy: ToyModel,
    surfaces: Vec<String>,
}

struct Translator {
    forward: HashMap<String, String>,
    backward: HashMap<String, String>,
}

/// Configuration for [`MockEndpoints`].
#[derive(Default)]
pub struct MockServerBuilder {
    classifier: Option<ToyModel>,
    completion: Option<CompletionBehavior>,
    translator: Option<Translator>,
    bearer: Option<String>,
}

impl MockServerBuilder {
    /// Start from an empty server (all routes 404).
    pub fn new() -> Self {
        Self::default()
    }

    /// Serve `POST /predict` with the toy model's probabilities.
    pub fn classifier(mut self, toy: ToyModel) -> Self {
        self.classifier = Some(toy);
        self
    }

    /// Serve `POST /score_labels`: the toy model scores the full prompt
    /// text, and each known candidate surface gets
    /// `ln(p_label * MOCK_VOCAB_MASS)`. Candidates that are not registered
    /// surfaces are omitted from the response (as a real endpoint omits
    /// candidates it refuses to score).
    pub fn completion(mut self, toy: ToyModel, surfaces: Vec<String>) -> Self {
        self.completion = Some(CompletionBehavior { toy, surfaces });
        self
    }

    /// Serve `POST /translate` by word-wise substitution: `pairs` maps
    /// source words to target words for `en -> de`, and the reverse mapping
    /// is used for `de -> en`. Unknown words pass through unchanged. When
    /// several source words share a target word, the first-listed pair wins
    /// in each direction, so the round trip lands on one canonical form.
    pub fn translator(mut self, pairs: &[(&str, &str)]) -> Self {
        let mut forward: HashMap<String, String> = HashMap::new();
        let mut backward: HashMap<String, String> = HashMap::new();
        for (en, de) in pairs {
            forward
                .entry(en.to_string())
                .or_insert_with(|| de.to_string());
            backward
                .entry(de.to_string())
                .or_insert_with(|| en.to_string());
        }
        self.translator = Some(Translator { forward, backward });
        self
    }

    /// Require `Authorization: Bearer <token>` on every request; anything
    /// else is answered with 401.
    pub fn bearer(mut self, token: impl Into<String>) -> Self {
        self.bearer = Some(token.into());
        self
    }

    /// Bind an ephemeral localhost port and start serving.
    pub fn start(self) -> Result<MockEndpoints> {
        let server = Server::http("127.0.0.1:0")
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        let port = server
            .server_addr()
            .to_ip()
            .expect("bound to an IP address")
            .port();
        let server = Arc::new(server);
        let requests = Arc::new(AtomicU64::new(0));
        let fail_remaining = Arc::new(AtomicU64::new(0));

        let loop_server = Arc::clone(&server);
        let loop_requests = Arc::clone(&requests);
        let loop_fail = Arc::clone(&fail_remaining);
        let handle = std::thread::spawn(move || {
            serve_loop(&loop_server, &self, &loop_requests, &loop_fail);
        });

        Ok(MockEndpoints {
            url: format!("http://127.0.0.1:{port}"),
            server,
            requests,
            fail_remaining,
            handle: Some(handle),
        })
    }
}

/// A running mock server; shuts down when dropped.
pub struct MockEndpoints {
    url: String,
    server: Arc<Server>,
    requests: Arc<AtomicU64>,
    fail_remaining: Arc<AtomicU64>,
    handle: Option<JoinHandle<()>>,
}

impl MockEndpoints {
    /// Base URL, e.g. `http://127.0.0.1:49152`.
    pub fn url(&self) -> &str {
        &self.url
    }

    /// Total requests received so far (including injected failures).
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    /// Answer the next `n` requests with HTTP 500.
    pub fn fail_next(&self, n: u64) {
        self.fail_remaining.store(n, Ordering::SeqCst);
    }
}

impl Drop for MockEndpoints {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn json_response(status: u16, value: &serde_json::Value) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
        .expect("static header is valid");
    Response::from_string(value.to_string())
        .with_status_code(status)
        .with_header(header)
}

fn error_response(status: u16, message: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(status, &serde_json::json!({ "error": message }))
}

fn serve_loop(
    server: &Server,
    behavior: &MockServerBuilder,
    requests: &AtomicU64,
    fail_remaining: &AtomicU64,
) {
    while let Ok(mut request) = server.recv() {
        requests.fetch_add(1, Ordering::SeqCst);

        let must_fail = fail_remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1))
            .is_ok();
        if must_fail {
            let _ = request.respond(error_response(500, "injected failure"));
            continue;
        }

        if let Some(expected) = &behavior.bearer {
            let ok = request.headers().iter().any(|h| {
                h.field.as_str().as_str().eq_ignore_ascii_case("authorization")
                    && h.value.as_str() == format!("Bearer {expected}")
            });
            if !ok {
                let _ = request.respond(error_response(401, "missing or wrong bearer token"));
                continue;
            }
        }

        let mut body = String::new();
        if request.as_reader().read_to_string(&mut body).is_err() {
            let _ = request.respond(error_response(400, "unreadable body"));
            continue;
        }
        let parsed: serde_json::Value = match serde_json::from_str(&body) {
            Ok(v) => v,
            Err(_) => {
                let _ = request.respond(error_response(400, "body is not JSON"));
                continue;
            }
        };

        if request.method() != &Method::Post {
            let _ = request.respond(error_response(405, "POST only"));
            continue;
        }

        let response = match request.url() {
            "/predict" => handle_predict(behavior, &parsed),
            "/score_labels" => handle_score_labels(behavior, &parsed),
            "/translate" => handle_translate(behavior, &parsed),
            _ => error_response(404, "unknown route"),
        };
        let _ = request.respond(response);
    }
}

fn handle_predict(
    behavior: &MockServerBuilder,
    body: &serde_json::Value,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let Some(toy) = &behavior.classifier else {
        return error_response(404, "no classifier configured");
    };
    let Some(text) = body.get("text").and_then(|v| v.as_str()) else {
        return error_response(400, "missing \"text\"");
    };
    match toy.predict(text) {
        Ok(prediction) => {
            let probs: serde_json::Map<String, serde_json::Value> = toy
                .label_set()
                .labels()
                .iter()
                .zip(&prediction.probs)
                .map(|(label, p)| (label.clone(), serde_json::json!(p)))
                .collect();
            json_response(200, &serde_json::json!({ "probs": probs }))
        }
        Err(e) => error_response(400, &e.to_string()),
    }
}

fn handle_score_labels(
    behavior: &MockServerBuilder,
    body: &serde_json::Value,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let Some(completion) = &behavior.completion else {
        return error_response(404, "no completion scorer configured");
    };
    let Some(prompt) = body.get("prompt").and_then(|v| v.as_str()) else {
        return error_response(400, "missing \"prompt\"");
    };
    let Some(candidates) = body.get("candidates").and_then(|v| v.as_array()) else {
        return error_response(400, "missing \"candidates\"");
    };
    let prediction = match completion.toy.predict(prompt) {
        Ok(p) => p,
        Err(e) => return error_response(400, &e.to_string()),
    };
    let mut logprobs = serde_json::Map::new();
    for candidate in candidates {
        let Some(candidate) = candidate.as_str() else {
            return error_response(400, "candidates must be strings");
        };
        if let Some(idx) = completion.surfaces.iter().position(|s| s == candidate) {
            let lp = (prediction.probs[idx] * MOCK_VOCAB_MASS).ln();
            logprobs.insert(candidate.to_string(), serde_json::json!(lp));
        }
    }
    json_response(200, &serde_json::json!({ "logprobs": logprobs }))
}

fn handle_translate(
    behavior: &MockServerBuilder,
    body: &serde_json::Value,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let Some(translator) = &behavior.translator else {
        return error_response(404, "no translator configured");
    };
    let (Some(text), Some(source), Some(target)) = (
        body.get("text").and_then(|v| v.as_str()),
        body.get("source").and_then(|v| v.as_str()),
        body.get("target").and_then(|v| v.as_str()),
    ) else {
        return error_response(400, "missing \"text\", \"source\", or \"target\"");
    };
    let mapping = match (source, target) {
        ("en", "de") => &translator.forward,
        ("de", "en") => &translator.backward,
        _ => return error_response(400, "unsupported language pair"),
    };
    let translated: Vec<String> = text
        .split_whitespace()
        .map(|w| mapping.get(w).cloned().unwrap_or_else(|| w.to_string()))
        .collect();
    json_response(200, &serde_json::json!({ "text": translated.join(" ") }))
}
