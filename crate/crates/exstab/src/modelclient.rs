//! Model access: a common classifier trait, a closed-form toy model, HTTP
//! clients for the two endpoint protocols, and a caching wrapper.
//!
//! Everything that consumes model predictions works against the
//! [`TextClassifier`] trait, so explainers and the runner are agnostic to
//! whether predictions come from the builtin toy model, a classifier
//! endpoint (`POST /predict`), or a completion endpoint scored over label
//! surface forms (`POST /score_labels`).
//!
//! [`CachedClassifier`] wraps any client with an exact-string query cache.
//! Perturbation grids re-query the same texts heavily (every case of a
//! document shares its unperturbed side), so the cache is what keeps the
//! measured query budget at `n + 1` per leave-one-out explanation instead of
//! `18 * (n + 1)`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::core::{LabelSet, Prediction};
use crate::error::{Error, Result};
use crate::http::{post_json, RetryPolicy};

/// Placeholder in a completion prompt template that receives the instance
/// text. Must appear exactly once.
pub const PROMPT_SLOT: &str = "{x}";

/// A named classifier over a fixed label set.
///
/// Implementations must be deterministic: the same input text always yields
/// the same prediction (HTTP clients assume the remote endpoint honors
/// this).
pub trait TextClassifier: Send + Sync {
    /// Stable model name (used in records and reports).
    fn name(&self) -> &str;

    /// The label set all predictions index into.
    fn label_set(&self) -> &LabelSet;

    /// Classify one text. Empty or whitespace-only text is invalid input.
    fn predict(&self, text: &str) -> Result<Prediction>;

    /// The exact string a query cache should key this text by.
    ///
    /// Defaults to the text itself; the completion client overrides it with
    /// the fully rendered prompt, because that is the string actually sent
    /// over the wire.
    fn cache_key(&self, text: &str) -> Result<String> {
        Ok(text.to_string())
    }
}

impl TextClassifier for Box<dyn TextClassifier> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn label_set(&self) -> &LabelSet {
        (**self).label_set()
    }

    fn predict(&self, text: &str) -> Result<Prediction> {
        (**self).predict(text)
    }

    fn cache_key(&self, text: &str) -> Result<String> {
        (**self).cache_key(text)
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_nonempty(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::InvalidInput(
            "cannot classify empty or whitespace-only text".into(),
        ));
    }
    Ok(())
}

/// Closed-form binary classifier over a signed word lexicon.
///
/// The text is whitespace-tokenized, each token is lowercased and looked up
/// in the lexicon (missing tokens contribute 0), and the summed weight `L`
/// becomes `P(label_0) = sigmoid(L)`, `P(label_1) = 1 - sigmoid(L)`. Positive
/// weights therefore pull toward the *first* label of the set.
pub fn toy_predict(lexicon: &HashMap<String, f64>, labels: &LabelSet, text: &str) -> Result<Prediction> {
    check_nonempty(text)?;
    if labels.len() != 2 {
        return Err(Error::Config(format!(
            "toy model is binary but label set has {} labels",
            labels.len()
        )));
    }
    let logit: f64 = text
        .split_whitespace()
        .map(|tok| lexicon.get(&tok.to_lowercase()).copied().unwrap_or(0.0))
        .sum();
    let p0 = sigmoid(logit);
    Prediction::from_probs(vec![p0, 1.0 - p0])
}

/// The builtin deterministic toy model; see [`toy_predict`] for semantics.
///
/// Because its probabilities are closed-form, leave-one-out importances have
/// an analytic oracle, which the test suite exploits heavily.
#[derive(Debug, Clone)]
pub struct ToyModel {
    name: String,
    labels: LabelSet,
    lexicon: HashMap<String, f64>,
}

impl ToyModel {
    /// Build a toy model. The label set must be binary and lexicon weights
    /// finite; lexicon keys are lowercased on entry.
    pub fn new(
        name: impl Into<String>,
        labels: LabelSet,
        lexicon: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self> {
        if labels.len() != 2 {
            return Err(Error::Config(format!(
                "toy model is binary but label set has {} labels",
                labels.len()
            )));
        }
        let mut lower = HashMap::new();
        for (word, weight) in lexicon {
            if !weight.is_finite() {
                return Err(Error::Config(format!(
                    "toy lexicon weight for {word:?} is not finite"
                )));
            }
            lower.insert(word.to_lowercase(), weight);
        }
        Ok(ToyModel {
            name: name.into(),
            labels,
            lexicon: lower,
        })
    }

    /// The model's lexicon (lowercased keys).
    pub fn lexicon(&self) -> &HashMap<String, f64> {
        &self.lexicon
    }

    /// Summed lexicon weight of a text (the logit of label 0).
    pub fn logit(&self, text: &str) -> f64 {
        text.split_whitespace()
            .map(|tok| self.lexicon.get(&tok.to_lowercase()).copied().unwrap_or(0.0))
            .sum()
    }
}

impl TextClassifier for ToyModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Prediction> {
        toy_predict(&self.lexicon, &self.labels, text)
    }
}

/// Client for the classifier wire protocol.
///
/// `POST {base_url}/predict` with `{"text": ...}`; the response must be
/// `{"probs": {label: number, ...}}` covering exactly the configured label
/// set. Probabilities are renormalized (their raw sum must be positive and
/// finite) and then validated.
pub struct HttpClassifier {
    name: String,
    labels: LabelSet,
    base_url: String,
    bearer: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpClassifier {
    /// Create a client for `base_url` (no trailing slash needed).
    pub fn new(
        name: impl Into<String>,
        labels: LabelSet,
        base_url: impl Into<String>,
        bearer: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        HttpClassifier {
            name: name.into(),
            labels,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            bearer,
            agent: crate::http::agent(),
            retry,
        }
    }
}

/// Renormalize raw per-label scores into a probability vector.
///
/// Shared by both endpoint clients: scores must be finite and non-negative
/// with a positive sum.
fn normalize_scores(scores: Vec<f64>, labels: &LabelSet) -> Result<Prediction> {
    let mut sum = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Protocol(format!(
                "score for label {:?} is {s}, expected finite and non-negative",
                labels.label(i)
            )));
        }
        sum += s;
    }
    if sum <= 0.0 {
        return Err(Error::Protocol("label scores sum to zero".into()));
    }
    Prediction::from_probs(scores.into_iter().map(|s| s / sum).collect())
}

impl TextClassifier for HttpClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Prediction> {
        check_nonempty(text)?;
        let url = format!("{}/predict", self.base_url);
        let body = serde_json::json!({ "text": text });
        let response = post_json(&self.agent, &url, self.bearer.as_deref(), &body, &self.retry)?;
        let probs_obj = response
            .get("probs")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Protocol(format!("{url} response is missing \"probs\" object")))?;
        for key in probs_obj.keys() {
            if self.labels.index_of(key).is_none() {
                return Err(Error::Protocol(format!(
                    "{url} returned unknown label {key:?}"
                )));
            }
        }
        let mut scores = Vec::with_capacity(self.labels.len());
        for label in self.labels.labels() {
            let p = probs_obj
                .get(label)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| {
                    Error::Protocol(format!("{url} response is missing label {label:?}"))
                })?;
            scores.push(p);
        }
        normalize_scores(scores, &self.labels)
    }
}

/// Fill the single `{x}` slot of a completion prompt template.
///
/// The template must contain the slot exactly once; zero or multiple
/// occurrences are configuration errors.
pub fn render_prompt(template: &str, instance_text: &str) -> Result<String> {
    let occurrences = template.matches(PROMPT_SLOT).count();
    if occurrences != 1 {
        return Err(Error::Config(format!(
            "prompt template must contain {PROMPT_SLOT} exactly once, found {occurrences}"
        )));
    }
    Ok(template.replacen(PROMPT_SLOT, instance_text, 1))
}

/// Turn per-candidate log-probabilities into label probabilities.
///
/// `scored` maps candidate surface strings to summed sequence
/// log-probabilities; `surface_forms[i]` is the surface string for label
/// `i`. The log-probabilities are renormalized over the label set only
/// (log-sum-exp with max subtraction, so widely spread values stay stable);
/// the result sums to 1 within 1e-9 by construction. A surface form missing
/// from `scored` is a protocol error naming the label it stands for.
pub fn extract_label_probs_from_completion(
    scored: &HashMap<String, f64>,
    labels: &LabelSet,
    surface_forms: &[String],
) -> Result<Vec<f64>> {
    if surface_forms.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} surface forms for {} labels",
            surface_forms.len(),
            labels.len()
        )));
    }
    let mut logprobs = Vec::with_capacity(surface_forms.len());
    for (i, surface) in surface_forms.iter().enumerate() {
        let lp = scored.get(surface).copied().ok_or_else(|| {
            Error::Protocol(format!(
                "no score returned for candidate {surface:?} (label {:?})",
                labels.label(i)
            ))
        })?;
        if !lp.is_finite() && lp != f64::NEG_INFINITY {
            return Err(Error::Protocol(format!(
                "log-probability for candidate {surface:?} is {lp}"
            )));
        }
        logprobs.push(lp);
    }
    let max = logprobs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Protocol(
            "all candidate log-probabilities are -inf".into(),
        ));
    }
    let unnorm: Vec<f64> = logprobs.iter().map(|lp| (lp - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / z).collect())
}

/// Client for the completion wire protocol.
///
/// The instance text is rendered into a prompt template and sent as
/// `POST {base_url}/score_labels` with
/// `{"prompt": ..., "candidates": [surface forms in label order]}`. The
/// response `{"logprobs": {candidate: number, ...}}` carries summed sequence
/// log-probabilities, which are renormalized over the label set (the
/// candidates never carry full vocabulary mass, so raw exponentials do not
/// sum to 1).
pub struct CompletionClassifier {
    name: String,
    labels: LabelSet,
    base_url: String,
    prompt_template: String,
    surface_forms: Vec<String>,
    bearer: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl CompletionClassifier {
    /// Create a client. `surface_forms[i]` is the completion candidate that
    /// stands for `labels.label(i)`. The template must contain `{x}` exactly
    /// once and surface forms must be distinct and non-empty.
    pub fn new(
        name: impl Into<String>,
        labels: LabelSet,
        base_url: impl Into<String>,
        prompt_template: impl Into<String>,
        surface_forms: Vec<String>,
        bearer: Option<String>,
        retry: RetryPolicy,
    ) -> Result<Self> {
        let prompt_template = prompt_template.into();
        render_prompt(&prompt_template, "probe")?;
        if surface_forms.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} surface forms for {} labels",
                surface_forms.len(),
                labels.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &surface_forms {
            if s.is_empty() {
                return Err(Error::Config("empty label surface form".into()));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::Config(format!("duplicate surface form {s:?}")));
            }
        }
        Ok(CompletionClassifier {
            name: name.into(),
            labels,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            prompt_template,
            surface_forms,
            bearer,
            agent: crate::http::agent(),
            retry,
        })
    }
}

impl TextClassifier for CompletionClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Prediction> {
        check_nonempty(text)?;
        let prompt = render_prompt(&self.prompt_template, text)?;
        let url = format!("{}/score_labels", self.base_url);
        let body = serde_json::json!({
            "prompt": prompt,
            "candidates": self.surface_forms,
        });
        let response = post_json(&self.agent, &url, self.bearer.as_deref(), &body, &self.retry)?;
        let scored_obj = response
            .get("logprobs")
            .and_then(|v| v.as_object())
            .ok_or_else(|| {
                Error::Protocol(format!("{url} response is missing \"logprobs\" object"))
            })?;
        let mut scored = HashMap::with_capacity(scored_obj.len());
        for (k, v) in scored_obj {
            let lp = v.as_f64().ok_or_else(|| {
                Error::Protocol(format!("log-probability for {k:?} is not a number"))
            })?;
            scored.insert(k.clone(), lp);
        }
        let probs = extract_label_probs_from_completion(&scored, &self.labels, &self.surface_forms)?;
        Prediction::from_probs(probs)
    }

    /// Completion queries are cached by the rendered prompt — the exact
    /// string sent over the wire.
    fn cache_key(&self, text: &str) -> Result<String> {
        render_prompt(&self.prompt_template, text)
    }
}

/// Hit/miss counters of a [`CachedClassifier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    /// Queries answered from the cache.
    pub hits: u64,
    /// Queries forwarded to the wrapped model (true API calls).
    pub misses: u64,
}

/// Exact-string query cache around any [`TextClassifier`].
///
/// Lookup keys come from the wrapped model's [`TextClassifier::cache_key`],
/// so completion models are keyed by their rendered prompt. Only cache
/// misses reach the wrapped model, and only misses increment the query
/// counter — the miss count is the number of true API calls made. Successful
/// predictions are cached; errors are not, so a failed query is retried next
/// time it is asked.
pub struct CachedClassifier<M> {
    inner: M,
    cache: RwLock<HashMap<String, Prediction>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<M: TextClassifier> CachedClassifier<M> {
    /// Wrap a classifier with an empty cache.
    pub fn new(inner: M) -> Self {
        CachedClassifier {
            inner,
            cache: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Current hit/miss counts.
    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    /// Number of distinct cached queries.
    pub fn cached_queries(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    /// The wrapped classifier.
    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: TextClassifier> TextClassifier for CachedClassifier<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn label_set(&self) -> &LabelSet {
        self.inner.label_set()
    }

    fn predict(&self, text: &str) -> Result<Prediction> {
        let key = self.inner.cache_key(text)?;
        if let Some(hit) = self.cache.read().expect("cache lock poisoned").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let prediction = self.inner.predict(text)?;
        self.cache
            .write()
            .expect("cache lock poisoned")
            .insert(key, prediction.clone());
        Ok(prediction)
    }

    fn cache_key(&self, text: &str) -> Result<String> {
        self.inner.cache_key(text)
    }
}
