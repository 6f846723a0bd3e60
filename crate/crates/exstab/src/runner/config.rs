//! TOML run configuration.
//!
//! The config is deserialized with `serde`, validated semantically by
//! [`RunConfig::validate`], and echoed into the run directory as JSON so a
//! run records exactly what produced it. `output_dir` is deliberately
//! excluded from the echo: moving a run directory must not invalidate it.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::core::LabelSet;
use crate::cost::TierThresholds;
use crate::error::{Error, Result};
use crate::explain::{ExplainerMethod, SurrogateParams};
use crate::http::RetryPolicy;
use crate::metrics::BootstrapParams;
use crate::modelclient::{
    CompletionClassifier, HttpClassifier, TextClassifier, ToyModel,
};
use crate::perturb::{DictionaryMt, HttpMt, IdentityMt, MtClient, OpType, Severity};

fn default_sample_size() -> usize {
    200
}

fn default_concurrency() -> usize {
    1
}

fn default_lang_en() -> String {
    "en".to_string()
}

fn default_lang_de() -> String {
    "de".to_string()
}

/// Top-level run configuration (TOML on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Root seed; every random decision in the run derives from it.
    pub global_seed: u64,
    /// Number of documents drawn from the dataset (default 200).
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    /// Run directory. Required by `run`, ignored by everything that reads
    /// an existing directory, and never echoed.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for case evaluation (default 1). Records are written
    /// in completion order, so only `concurrency = 1` yields byte-stable
    /// `records.jsonl`; reports are order-insensitive either way.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    #[serde(default)]
    pub bootstrap: BootstrapParams,
    #[serde(default)]
    pub perturbations: PerturbationsConfig,
    #[serde(default)]
    pub translation: TranslationConfig,
    #[serde(default)]
    pub cost: TierThresholds,
    /// Retry behavior for every HTTP client the run builds (model
    /// endpoints and the translation endpoint alike).
    #[serde(default)]
    pub retry: RetryConfig,
    pub models: Vec<ModelConfig>,
}

/// Config-file form of [`RetryPolicy`]: a retry count and a backoff base in
/// milliseconds, doubled per retry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    /// Retries after the initial attempt.
    pub max_retries: u32,
    /// Backoff before the first retry, in milliseconds.
    pub base_delay_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        let policy = RetryPolicy::default();
        RetryConfig {
            max_retries: policy.max_retries,
            base_delay_ms: policy.base_delay.as_millis() as u64,
        }
    }
}

impl RetryConfig {
    /// The equivalent client-side policy.
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: std::time::Duration::from_millis(self.base_delay_ms),
        }
    }
}

/// Input corpus location and format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Display name; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    pub format: DatasetFormat,
}

impl DatasetConfig {
    /// Configured name, or the file stem as a fallback.
    pub fn resolved_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

/// Explanation method plus its (surrogate-only) sampling parameters.
///
/// The surrogate knobs are flattened so TOML reads naturally:
///
/// ```toml
/// [explainer]
/// method = "surrogate"
/// num_samples = 200
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    pub method: ExplainerMethod,
    #[serde(flatten)]
    pub surrogate: SurrogateParams,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            method: ExplainerMethod::Loo,
            surrogate: SurrogateParams::default(),
        }
    }
}

/// Which operators and severities the grid enumerates, and where word
/// substitutions come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationsConfig {
    /// Operators to apply (default: all six).
    pub operators: Vec<OpType>,
    /// Severities to apply (default: 0.05, 0.10, 0.20).
    pub severities: Vec<Severity>,
    /// TSV synonym lexicon (`word<TAB>alt1,alt2`). Defaults to the small
    /// bundled lexicon when omitted.
    pub lexicon: Option<PathBuf>,
}

impl Default for PerturbationsConfig {
    fn default() -> Self {
        PerturbationsConfig {
            operators: OpType::ALL.to_vec(),
            severities: Severity::ALL.to_vec(),
            lexicon: None,
        }
    }
}

/// Machine-translation backend for round-trip rewriting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslationConfig {
    pub kind: TranslationKind,
    /// Endpoint base URL (`kind = "http"` only).
    pub base_url: Option<String>,
    /// Name of the environment variable holding the bearer token, if the
    /// endpoint needs one. The token itself never appears in config files.
    pub bearer_token_env: Option<String>,
    /// Word-for-word dictionary (`kind = "dictionary"` only), source → pivot.
    pub pairs: Option<BTreeMap<String, String>>,
    pub source_lang: String,
    pub pivot_lang: String,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            kind: TranslationKind::Identity,
            base_url: None,
            bearer_token_env: None,
            pairs: None,
            source_lang: default_lang_en(),
            pivot_lang: default_lang_de(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslationKind {
    /// Round trip returns the input unchanged (offline baseline).
    Identity,
    /// Deterministic word-for-word dictionary round trip (offline).
    Dictionary,
    /// A real `/translate` endpoint.
    Http,
}

/// One model under evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Unique handle used in records, reports, and seed derivation.
    pub name: String,
    pub kind: ModelKind,
    /// Output label names, in the order the probability vector uses.
    pub labels: Vec<String>,
    /// Relative price of one query to this model (default 1.0).
    #[serde(default = "default_per_call_cost")]
    pub per_call_cost: f64,
    /// Endpoint base URL (endpoint kinds only).
    #[serde(default)]
    pub base_url: Option<String>,
    /// Environment variable holding the bearer token, if any.
    #[serde(default)]
    pub bearer_token_env: Option<String>,
    /// Prompt template with a `{x}` slot (`completion_endpoint` only).
    #[serde(default)]
    pub prompt_template: Option<String>,
    /// Label → completion surface form (`completion_endpoint` only).
    #[serde(default)]
    pub surface_forms: Option<BTreeMap<String, String>>,
    /// Word → weight lexicon (`builtin_toy` only). Positive weight pulls
    /// toward the first label.
    #[serde(default)]
    pub lexicon: Option<BTreeMap<String, f64>>,
}

fn default_per_call_cost() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// In-process linear bag-of-words scorer; needs no network.
    BuiltinToy,
    /// `POST {base_url}/predict` returning a label → probability map.
    ClassifierEndpoint,
    /// `POST {base_url}/score_labels` returning candidate log-probabilities.
    CompletionEndpoint,
}

fn bearer_from_env(var: &Option<String>) -> Result<Option<String>> {
    match var {
        None => Ok(None),
        Some(name) => match std::env::var(name) {
            Ok(token) => Ok(Some(token)),
            Err(_) => Err(Error::Config(format!(
                "bearer_token_env names environment variable {name:?}, which is not set"
            ))),
        },
    }
}

impl ModelConfig {
    fn label_set(&self) -> Result<LabelSet> {
        LabelSet::new(self.labels.iter().cloned())
            .map_err(|e| Error::Config(format!("model {:?}: {e}", self.name)))
    }

    /// Semantic validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("model name must be non-empty".into()));
        }
        if self.name.contains('|') || self.name.chars().any(|c| c.is_control()) {
            return Err(Error::Config(format!(
                "model name {:?} may not contain '|' or control characters",
                self.name
            )));
        }
        let label_set = self.label_set()?;
        if !(self.per_call_cost.is_finite() && self.per_call_cost > 0.0) {
            return Err(Error::Config(format!(
                "model {:?}: per_call_cost must be positive and finite",
                self.name
            )));
        }
        let want = |field: &Option<_>, name: &str, required: bool| -> Result<()> {
            if required && field.is_none() {
                return Err(Error::Config(format!(
                    "model {:?}: {name} is required for kind {:?}",
                    self.name, self.kind
                )));
            }
            Ok(())
        };
        match self.kind {
            ModelKind::BuiltinToy => {
                want(&self.lexicon.as_ref().map(|_| ()), "lexicon", true)?;
                if label_set.len() != 2 {
                    return Err(Error::Config(format!(
                        "model {:?}: builtin_toy needs exactly 2 labels",
                        self.name
                    )));
                }
            }
            ModelKind::ClassifierEndpoint => {
                want(&self.base_url.as_ref().map(|_| ()), "base_url", true)?;
            }
            ModelKind::CompletionEndpoint => {
                want(&self.base_url.as_ref().map(|_| ()), "base_url", true)?;
                want(&self.prompt_template.as_ref().map(|_| ()), "prompt_template", true)?;
                let surfaces = self.surface_forms.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "model {:?}: surface_forms is required for kind completion_endpoint",
                        self.name
                    ))
                })?;
                for label in label_set.labels() {
                    if !surfaces.contains_key(label) {
                        return Err(Error::Config(format!(
                            "model {:?}: surface_forms is missing label {label:?}",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Build the live client this entry describes. Bearer tokens are read
    /// from the environment here, at construction time.
    pub fn build_client(&self, retry: RetryPolicy) -> Result<Box<dyn TextClassifier>> {
        let label_set = self.label_set()?;
        let bearer = bearer_from_env(&self.bearer_token_env)?;
        match self.kind {
            ModelKind::BuiltinToy => {
                let lexicon = self.lexicon.clone().ok_or_else(|| {
                    Error::Config(format!("model {:?}: lexicon is required", self.name))
                })?;
                let model = ToyModel::new(self.name.clone(), label_set, lexicon)?;
                Ok(Box::new(model))
            }
            ModelKind::ClassifierEndpoint => {
                let base = self.base_url.clone().ok_or_else(|| {
                    Error::Config(format!("model {:?}: base_url is required", self.name))
                })?;
                Ok(Box::new(HttpClassifier::new(
                    self.name.clone(),
                    label_set,
                    base,
                    bearer,
                    retry,
                )))
            }
            ModelKind::CompletionEndpoint => {
                let base = self.base_url.clone().ok_or_else(|| {
                    Error::Config(format!("model {:?}: base_url is required", self.name))
                })?;
                let template = self.prompt_template.clone().ok_or_else(|| {
                    Error::Config(format!("model {:?}: prompt_template is required", self.name))
                })?;
                let surface_map = self.surface_forms.clone().unwrap_or_default();
                let surfaces: Vec<String> = label_set
                    .labels()
                    .iter()
                    .map(|label| {
                        surface_map.get(label).cloned().ok_or_else(|| {
                            Error::Config(format!(
                                "model {:?}: surface_forms is missing label {label:?}",
                                self.name
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(Box::new(CompletionClassifier::new(
                    self.name.clone(),
                    label_set,
                    base,
                    template,
                    surfaces,
                    bearer,
                    retry,
                )?))
            }
        }
    }
}

impl TranslationConfig {
    /// Semantic validation.
    pub fn validate(&self) -> Result<()> {
        if self.source_lang.is_empty() || self.pivot_lang.is_empty() {
            return Err(Error::Config(
                "translation languages must be non-empty".into(),
            ));
        }
        if self.source_lang == self.pivot_lang {
            return Err(Error::Config(
                "translation source_lang and pivot_lang must differ".into(),
            ));
        }
        match self.kind {
            TranslationKind::Identity => Ok(()),
            TranslationKind::Dictionary => {
                if self.pairs.as_ref().is_none_or(|p| p.is_empty()) {
                    return Err(Error::Config(
                        "translation kind \"dictionary\" needs a non-empty pairs table".into(),
                    ));
                }
                Ok(())
            }
            TranslationKind::Http => {
                if self.base_url.is_none() {
                    return Err(Error::Config(
                        "translation kind \"http\" needs base_url".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Build the configured round-trip client.
    pub fn build_client(&self, retry: RetryPolicy) -> Result<Box<dyn MtClient>> {
        match self.kind {
            TranslationKind::Identity => Ok(Box::new(IdentityMt)),
            TranslationKind::Dictionary => {
                let owned = self.pairs.clone().unwrap_or_default();
                let pairs: Vec<(&str, &str)> = owned
                    .iter()
                    .map(|(a, b)| (a.as_str(), b.as_str()))
                    .collect();
                Ok(Box::new(DictionaryMt::new(
                    &self.source_lang,
                    &self.pivot_lang,
                    &pairs,
                )))
            }
            TranslationKind::Http => {
                let base = self.base_url.clone().ok_or_else(|| {
                    Error::Config("translation kind \"http\" needs base_url".into())
                })?;
                let bearer = bearer_from_env(&self.bearer_token_env)?;
                Ok(Box::new(HttpMt::new(base, bearer, retry)))
            }
        }
    }
}

impl RunConfig {
    /// Parse a TOML config file.
    ///
    /// Relative paths inside the config (`dataset.path`,
    /// `perturbations.lexicon`, `output_dir`) are resolved against the
    /// config file's directory, so a config works no matter where the
    /// process was started.
    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let content = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&content)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| std::path::Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.dataset.path);
        if let Some(lexicon) = &mut config.perturbations.lexicon {
            rebase(lexicon);
        }
        if let Some(output_dir) = &mut config.output_dir {
            rebase(output_dir);
        }
        Ok(config)
    }

    /// Semantic validation of the whole config.
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::Config("sample_size must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        let mut names = std::collections::HashSet::new();
        for model in &self.models {
            model.validate()?;
            if !names.insert(model.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate model name {:?}",
                    model.name
                )));
            }
        }
        if self.perturbations.operators.is_empty() {
            return Err(Error::Config("operators must be non-empty".into()));
        }
        if self.perturbations.severities.is_empty() {
            return Err(Error::Config("severities must be non-empty".into()));
        }
        let mut seen_ops = std::collections::HashSet::new();
        for op in &self.perturbations.operators {
            if !seen_ops.insert(*op) {
                return Err(Error::Config(format!("duplicate operator {op}")));
            }
        }
        let mut seen_sev = std::collections::HashSet::new();
        for sev in &self.perturbations.severities {
            if !seen_sev.insert(sev.label()) {
                return Err(Error::Config(format!(
                    "duplicate severity {}",
                    sev.value()
                )));
            }
        }
        if !(self.bootstrap.iterations >= 1) {
            return Err(Error::Config("bootstrap.iterations must be at least 1".into()));
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return Err(Error::Config(
                "bootstrap.level must be strictly between 0 and 1".into(),
            ));
        }
        self.cost.validate()?;
        self.translation.validate()?;
        self.explainer.surrogate.validate_static()?;
        Ok(())
    }

    /// The JSON string echoed into the run directory. Excludes `output_dir`
    /// so a run directory can be moved or re-reported from anywhere.
    pub fn echo_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
global_seed = 7

[dataset]
path = "data/reviews.jsonl"
format = "jsonl"

[[models]]
name = "toy"
kind = "builtin_toy"
labels = ["pos", "neg"]
lexicon = { good = 1.0, bad = -1.0 }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.sample_size, 200);
        assert_eq!(config.concurrency, 1);
        assert_eq!(config.explainer.method, ExplainerMethod::Loo);
        assert_eq!(config.explainer.surrogate.num_samples, 200);
        assert_eq!(config.bootstrap.iterations, 10_000);
        assert_eq!(config.bootstrap.level, 0.95);
        assert_eq!(config.perturbations.operators.len(), 6);
        assert_eq!(config.perturbations.severities.len(), 3);
        assert_eq!(config.translation.kind, TranslationKind::Identity);
        assert_eq!(config.cost.regulatory_max, 0.10);
        assert_eq!(config.dataset.resolved_name(), "reviews");
    }

    #[test]
    fn echo_omits_output_dir_and_round_trips() {
        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.output_dir = Some(PathBuf::from("/tmp/run"));
        let echo = config.echo_json().unwrap();
        assert!(!echo.contains("output_dir"));
        let back: RunConfig = serde_json::from_str(&echo).unwrap();
        assert_eq!(back.output_dir, None);
        assert_eq!(back.echo_json().unwrap(), echo);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.models.push(config.models[0].clone());
        assert!(config.validate().is_err(), "duplicate model names");

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.models[0].lexicon = None;
        assert!(config.validate().is_err(), "toy without lexicon");

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.perturbations.operators.clear();
        assert!(config.validate().is_err(), "no operators");

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.translation.kind = TranslationKind::Http;
        assert!(config.validate().is_err(), "http translation without base_url");

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.models[0].name = "a|b".into();
        assert!(config.validate().is_err(), "separator in model name");
    }

    #[test]
    fn endpoint_model_kinds_validate_required_fields() {
        let toml_str = r#"
global_seed = 1
[dataset]
path = "d.jsonl"
format = "jsonl"
[[models]]
name = "llm"
kind = "completion_endpoint"
labels = ["pos", "neg"]
base_url = "http://localhost:9"
prompt_template = "Review: {x} Sentiment:"
surface_forms = { pos = " positive", neg = " negative" }
"#;
        let config: RunConfig = toml::from_str(toml_str).unwrap();
        config.validate().unwrap();

        let mut bad = config.clone();
        bad.models[0].surface_forms = Some(BTreeMap::from([("pos".to_string(), " p".to_string())]));
        assert!(bad.validate().is_err(), "missing surface form for neg");

        let mut bad = config.clone();
        bad.models[0].prompt_template = Some("no slot".into());
        // Template syntax is checked at client construction, not validate();
        // validate only checks presence.
        assert!(bad.validate().is_ok());
        assert!(bad.models[0].build_client(RetryPolicy::none()).is_err());
    }

    #[test]
    fn bearer_env_resolution() {
        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.models[0].bearer_token_env = Some("EXSTAB_TEST_ABSENT_TOKEN".into());
        let err = config.models[0]
            .build_client(RetryPolicy::none())
            .err()
            .expect("missing env var must fail");
        assert!(err.to_string().contains("EXSTAB_TEST_ABSENT_TOKEN"), "{err}");
    }

    #[test]
    fn surrogate_explainer_config_flattens() {
        let toml_str = r#"
global_seed = 1
[dataset]
path = "d.jsonl"
format = "jsonl"
[explainer]
method = "surrogate"
num_samples = 64
kernel_width = 0.5
[[models]]
name = "toy"
kind = "builtin_toy"
labels = ["a", "b"]
lexicon = { x = 1.0 }
"#;
        let config: RunConfig = toml::from_str(toml_str).unwrap();
        assert_eq!(config.explainer.method, ExplainerMethod::Surrogate);
        assert_eq!(config.explainer.surrogate.num_samples, 64);
        assert_eq!(config.explainer.surrogate.kernel_width, 0.5);
        assert_eq!(config.explainer.surrogate.mask_probability, 0.5);
    }
}
