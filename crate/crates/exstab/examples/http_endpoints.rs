//! The three wire protocols, exercised against a local in-process server:
//! classifier prediction, completion-style label scoring, and translation —
//! plus bearer auth, retry-with-backoff, and the query cache.
//!
//! ```text
//! cargo run --example http_endpoints
//! ```
//!
//! Protocols:
//! * `POST /predict`      {"text"} -> {"probs": {label: p, ...}}
//! * `POST /score_labels` {"prompt", "candidates"} -> {"logprobs": {candidate: lp, ...}}
//! * `POST /translate`    {"text", "source", "target"} -> {"text"}
//!
//! Transport failures (connection refused, HTTP 5xx) are retried three
//! times with exponential backoff; malformed 2xx responses are protocol
//! errors and fail immediately.

use exstab::core::LabelSet;
use exstab::http::RetryPolicy;
use exstab::mockserver::MockServerBuilder;
use exstab::modelclient::{
    CachedClassifier, CompletionClassifier, HttpClassifier, TextClassifier, ToyModel,
};
use exstab::perturb::{HttpMt, MtClient};

fn main() -> exstab::Result<()> {
    let labels = LabelSet::new(["positive", "negative"])?;
    let toy = ToyModel::new(
        "backend",
        labels.clone(),
        [("good".to_string(), 1.0), ("bad".to_string(), -1.0)],
    )?;

    // One server, all three endpoints, bearer-protected.
    let server = MockServerBuilder::new()
        .classifier(toy.clone())
        .completion(toy.clone(), vec![" positive".into(), " negative".into()])
        .translator(&[("good", "gut"), ("film", "kinofilm")])
        .bearer("secret-token")
        .start()?;
    println!("mock server  : {}\n", server.url());

    // --- classifier endpoint ------------------------------------------
    let classifier = HttpClassifier::new(
        "clf",
        labels.clone(),
        server.url(),
        Some("secret-token".to_string()),
        RetryPolicy::fast(),
    );
    let pred = classifier.predict("a good film")?;
    println!(
        "/predict     : {} (p = {:.6}, probs sum to {:.1})",
        labels.label(pred.predicted_index),
        pred.confidence(),
        pred.probs.iter().sum::<f64>()
    );

    // --- completion endpoint -------------------------------------------
    // The prompt template's {x} slot receives the instance text; the
    // endpoint scores each label's surface form as a continuation, and the
    // client renormalizes exp(logprob) over exactly the label set.
    let completion = CompletionClassifier::new(
        "llm",
        labels.clone(),
        server.url(),
        "Review: {x}\nSentiment:",
        vec![" positive".to_string(), " negative".to_string()],
        Some("secret-token".to_string()),
        RetryPolicy::fast(),
    )?;
    let pred = completion.predict("a good film")?;
    println!(
        "/score_labels: {} (p = {:.6}, probs sum to {:.1})",
        labels.label(pred.predicted_index),
        pred.confidence(),
        pred.probs.iter().sum::<f64>()
    );

    // --- translation endpoint -------------------------------------------
    let mt = HttpMt::new(server.url(), Some("secret-token".to_string()), RetryPolicy::fast());
    let german = mt.translate("a good film", "en", "de")?;
    let back = mt.translate(&german, "de", "en")?;
    println!("/translate   : \"a good film\" -> {german:?} -> {back:?}\n");

    // --- retries ---------------------------------------------------------
    // Two injected 500s, three retries configured: the request succeeds on
    // the third attempt without surfacing an error.
    let before = server.request_count();
    server.fail_next(2);
    let pred = classifier.predict("a good film")?;
    println!(
        "retries      : 2 injected failures absorbed; {} attempts for one answer (p = {:.4})",
        server.request_count() - before,
        pred.confidence()
    );

    // --- auth -------------------------------------------------------------
    let unauthorized = HttpClassifier::new(
        "clf-noauth",
        labels.clone(),
        server.url(),
        Some("wrong-token".to_string()),
        RetryPolicy::none(),
    );
    let err = unauthorized.predict("a good film").expect_err("401");
    println!("bad bearer   : {err}");

    // --- query cache -------------------------------------------------------
    // The cache keys classifier queries by text and completion queries by
    // the rendered prompt; only misses reach the network.
    let cached = CachedClassifier::new(classifier);
    let texts = ["good", "bad", "good", "good", "bad"];
    let before = server.request_count();
    for t in texts {
        cached.predict(t)?;
    }
    let stats = cached.stats();
    println!(
        "cache        : {} queries -> {} misses + {} hits ({} requests on the wire)",
        texts.len(),
        stats.misses,
        stats.hits,
        server.request_count() - before
    );
    assert_eq!(stats.misses, 2);
    assert_eq!(stats.hits, 3);
    Ok(())
}
