//! Seeded input perturbations and the evaluation grid.
//!
//! Six operator families perturb a document at three severity levels each.
//! Char-level operators spend a budget of `floor(severity * C)` edits, where
//! `C` counts non-whitespace characters; word-level operators spend
//! `floor(severity * n)` edits over `n` words. Every operator draws from a
//! [`ChaCha8Rng`](rand_chacha::ChaCha8Rng) seeded per `(document, operator,
//! severity)`, so the same config always produces the same perturbed text —
//! and therefore the same original/perturbed pairing for every model
//! evaluated against the grid.
//!
//! Safeguards keep perturbed text classifiable: deletions never empty a word
//! or remove the last content word, swap/shuffle preserve the word multiset,
//! and replacements preserve word count exactly. When eligibility runs out
//! before the budget does, the operator stops early and reports
//! `applied < budget` rather than forcing degenerate edits.
//!
//! Back-translation is the odd one out: it is a whole-text round trip
//! through a pivot language with no severity knob, so its three grid cells
//! are replicates of one transformation and are flagged as such.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::core::{detokenize, is_content_word, Document};
use crate::error::{Error, Result};
use crate::http::{post_json, RetryPolicy};
use crate::seed::{derive_seed, rng_from_seed};

/// Width of each local shuffle window, in words.
pub const SHUFFLE_WINDOW: usize = 3;

/// The six perturbation operator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpType {
    /// Swap adjacent non-whitespace character pairs.
    CharSwap,
    /// Delete characters, never emptying a word.
    CharDelete,
    /// Replace content words using a synonym lexicon.
    SynonymReplace,
    /// Delete words, always keeping at least one content word.
    WordDelete,
    /// Shuffle words inside small local windows.
    WordShuffle,
    /// Round-trip the whole text through a pivot language.
    BackTranslate,
}

impl OpType {
    /// All operators in canonical order.
    pub const ALL: [OpType; 6] = [
        OpType::CharSwap,
        OpType::CharDelete,
        OpType::SynonymReplace,
        OpType::WordDelete,
        OpType::WordShuffle,
        OpType::BackTranslate,
    ];

    /// The operator's wire name (snake_case, as used in configs and records).
    pub fn name(self) -> &'static str {
        match self {
            OpType::CharSwap => "char_swap",
            OpType::CharDelete => "char_delete",
            OpType::SynonymReplace => "synonym_replace",
            OpType::WordDelete => "word_delete",
            OpType::WordShuffle => "word_shuffle",
            OpType::BackTranslate => "back_translate",
        }
    }

    /// Whether the budget is counted in characters (true) or words (false).
    pub fn is_char_level(self) -> bool {
        matches!(self, OpType::CharSwap | OpType::CharDelete)
    }
}

impl fmt::Display for OpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OpType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OpType::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown operator {s:?}")))
    }
}

/// Perturbation severity. Exactly three levels exist; budgets are exact
/// integer floors (`count / 20`, `/ 10`, `/ 5`), immune to float rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    /// 5% of the budget base.
    S05,
    /// 10% of the budget base.
    S10,
    /// 20% of the budget base.
    S20,
}

impl Severity {
    /// All severities in ascending order.
    pub const ALL: [Severity; 3] = [Severity::S05, Severity::S10, Severity::S20];

    /// Numeric value (0.05, 0.10, 0.20).
    pub fn value(self) -> f64 {
        match self {
            Severity::S05 => 0.05,
            Severity::S10 => 0.10,
            Severity::S20 => 0.20,
        }
    }

    /// Canonical text form ("0.05", "0.10", "0.20").
    pub fn label(self) -> &'static str {
        match self {
            Severity::S05 => "0.05",
            Severity::S10 => "0.10",
            Severity::S20 => "0.20",
        }
    }

    fn denominator(self) -> usize {
        match self {
            Severity::S05 => 20,
            Severity::S10 => 10,
            Severity::S20 => 5,
        }
    }

    /// `floor(severity * count)`, computed exactly as integer division.
    pub fn budget(self, count: usize) -> usize {
        count / self.denominator()
    }

    /// Parse a numeric severity; only the three defined values (within
    /// 1e-9) are accepted.
    pub fn try_from_value(v: f64) -> Result<Self> {
        Severity::ALL
            .into_iter()
            .find(|s| (s.value() - v).abs() < 1e-9)
            .ok_or_else(|| {
                Error::Config(format!(
                    "severity {v} is not one of 0.05, 0.10, 0.20"
                ))
            })
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Severity {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Severity {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Severity::try_from_value(v).map_err(serde::de::Error::custom)
    }
}

/// Identity of one perturbation: operator, severity, and the derived seed
/// that makes it reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PerturbationConfig {
    /// Operator family.
    pub op: OpType,
    /// Severity level.
    pub severity: Severity,
    /// Seed for the operator's RNG, derived from the global seed and the
    /// case identity.
    pub seed: u64,
}

/// Result of a char-level operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TextOutcome {
    /// Perturbed text.
    pub text: String,
    /// Edits the severity allowed.
    pub budget: usize,
    /// Edits actually made (`<= budget`; less when eligibility ran out).
    pub applied: usize,
}

/// Result of a word-level operator.
#[derive(Debug, Clone, PartialEq)]
pub struct WordsOutcome {
    /// Perturbed word list.
    pub words: Vec<String>,
    /// Edits the severity allowed.
    pub budget: usize,
    /// Edits actually made (`<= budget`).
    pub applied: usize,
}

/// Swap adjacent character pairs within words.
///
/// Budget: `floor(severity * C)` over the `C` non-whitespace characters.
/// Candidate pairs are adjacent positions that are both non-whitespace;
/// pairs are drawn without replacement by start position. Whitespace is
/// never touched, so the word count is preserved.
pub fn char_swap(text: &str, severity: Severity, seed: u64) -> TextOutcome {
    let mut chars: Vec<char> = text.chars().collect();
    let non_ws = chars.iter().filter(|c| !c.is_whitespace()).count();
    let budget = severity.budget(non_ws);
    let mut candidates: Vec<usize> = (0..chars.len().saturating_sub(1))
        .filter(|&i| !chars[i].is_whitespace() && !chars[i + 1].is_whitespace())
        .collect();
    let mut rng = rng_from_seed(seed);
    let applied = budget.min(candidates.len());
    for _ in 0..applied {
        let k = rng.random_range(0..candidates.len());
        let i = candidates.swap_remove(k);
        chars.swap(i, i + 1);
    }
    TextOutcome {
        text: chars.into_iter().collect(),
        budget,
        applied,
    }
}

/// Delete characters, never emptying a word.
///
/// Budget: `floor(severity * C)`. Each round draws uniformly among
/// non-whitespace characters whose word still has at least two characters
/// left; single-character words are never eligible, so every word survives
/// and the word count is preserved.
pub fn char_delete(text: &str, severity: Severity, seed: u64) -> TextOutcome {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    const NO_WORD: usize = usize::MAX;
    let mut word_of = vec![NO_WORD; n];
    let mut word_sizes: Vec<usize> = Vec::new();
    let mut in_word = false;
    for (i, c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            in_word = false;
            continue;
        }
        if !in_word {
            word_sizes.push(0);
            in_word = true;
        }
        let w = word_sizes.len() - 1;
        word_of[i] = w;
        word_sizes[w] += 1;
    }
    let non_ws: usize = word_sizes.iter().sum();
    let budget = severity.budget(non_ws);

    let mut deleted = vec![false; n];
    let mut rng = rng_from_seed(seed);
    let mut applied = 0;
    for _ in 0..budget {
        let eligible: Vec<usize> = (0..n)
            .filter(|&i| !deleted[i] && word_of[i] != NO_WORD && word_sizes[word_of[i]] >= 2)
            .collect();
        if eligible.is_empty() {
            break;
        }
        let pick = eligible[rng.random_range(0..eligible.len())];
        deleted[pick] = true;
        word_sizes[word_of[pick]] -= 1;
        applied += 1;
    }
    let text: String = chars
        .iter()
        .enumerate()
        .filter(|(i, _)| !deleted[*i])
        .map(|(_, c)| *c)
        .collect();
    TextOutcome {
        text,
        budget,
        applied,
    }
}

/// Replace content words with synonyms from the lexicon.
///
/// Budget: `floor(severity * n)` over the `n` words. Eligible positions hold
/// a content word whose lowercased form has a lexicon entry; positions are
/// drawn without replacement, and each replacement is drawn uniformly from
/// the word's candidate list. Word count is preserved exactly.
pub fn synonym_replace(
    words: &[String],
    severity: Severity,
    seed: u64,
    lexicon: &SynonymLexicon,
) -> WordsOutcome {
    let n = words.len();
    let budget = severity.budget(n);
    let mut pool: Vec<usize> = (0..n)
        .filter(|&i| is_content_word(&words[i]) && lexicon.contains(&words[i].to_lowercase()))
        .collect();
    let applied = budget.min(pool.len());
    let mut rng = rng_from_seed(seed);
    let mut out = words.to_vec();
    for _ in 0..applied {
        let k = rng.random_range(0..pool.len());
        let pos = pool.swap_remove(k);
        let candidates = lexicon
            .candidates(&words[pos].to_lowercase())
            .expect("pool positions have lexicon entries");
        out[pos] = candidates[rng.random_range(0..candidates.len())].clone();
    }
    WordsOutcome {
        words: out,
        budget,
        applied,
    }
}

/// Delete words, keeping at least one content word (and at least one word
/// overall, for inputs that have no content word at all).
///
/// Budget: `floor(severity * n)`. Each round draws uniformly among surviving
/// words, excluding the last remaining content word.
pub fn word_delete(words: &[String], severity: Severity, seed: u64) -> WordsOutcome {
    let n = words.len();
    let budget = severity.budget(n);
    let is_content: Vec<bool> = words.iter().map(|w| is_content_word(w)).collect();
    let mut content_left = is_content.iter().filter(|&&b| b).count();
    let mut keep = vec![true; n];
    let mut remaining = n;
    let mut rng = rng_from_seed(seed);
    let mut applied = 0;
    for _ in 0..budget {
        if remaining <= 1 {
            break;
        }
        let eligible: Vec<usize> = (0..n)
            .filter(|&i| keep[i] && !(is_content[i] && content_left == 1))
            .collect();
        if eligible.is_empty() {
            break;
        }
        let pick = eligible[rng.random_range(0..eligible.len())];
        keep[pick] = false;
        remaining -= 1;
        if is_content[pick] {
            content_left -= 1;
        }
        applied += 1;
    }
    let out: Vec<String> = words
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, w)| w.clone())
        .collect();
    WordsOutcome {
        words: out,
        budget,
        applied,
    }
}

/// Shuffle words inside local windows of [`SHUFFLE_WINDOW`] words.
///
/// Budget: `floor(severity * n)` window anchors, sampled without replacement
/// and processed in ascending position order; each window `[a, a+W)`
/// (clipped at the end) is shuffled in place. The word multiset is
/// preserved.
pub fn word_shuffle(words: &[String], severity: Severity, seed: u64) -> WordsOutcome {
    let n = words.len();
    let budget = severity.budget(n);
    let take = budget.min(n);
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for j in 0..take {
        let k = rng.random_range(j..n);
        idx.swap(j, k);
    }
    let mut anchors: Vec<usize> = idx[..take].to_vec();
    anchors.sort_unstable();
    let mut out = words.to_vec();
    for &a in &anchors {
        let end = (a + SHUFFLE_WINDOW).min(n);
        out[a..end].shuffle(&mut rng);
    }
    WordsOutcome {
        words: out,
        budget,
        applied: take,
    }
}

/// A machine-translation backend for [`back_translate`].
pub trait MtClient: Send + Sync {
    /// Translate `text` from `source` to `target` (ISO 639-1 codes).
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String>;
}

/// Round-trip `text` through the pivot language.
///
/// An empty (or whitespace-only) result at either hop is a protocol error;
/// the grid turns that into a skipped case rather than admitting empty text.
pub fn back_translate(
    text: &str,
    mt: &dyn MtClient,
    source_lang: &str,
    pivot_lang: &str,
) -> Result<String> {
    let pivot_text = mt.translate(text, source_lang, pivot_lang)?;
    if pivot_text.trim().is_empty() {
        return Err(Error::Protocol(format!(
            "translation {source_lang} -> {pivot_lang} returned empty text"
        )));
    }
    let round_trip = mt.translate(&pivot_text, pivot_lang, source_lang)?;
    if round_trip.trim().is_empty() {
        return Err(Error::Protocol(format!(
            "translation {pivot_lang} -> {source_lang} returned empty text"
        )));
    }
    Ok(round_trip)
}

/// Translator that returns its input unchanged. Useful for dry runs where
/// back-translation should be a no-op rather than an error.
pub struct IdentityMt;

impl MtClient for IdentityMt {
    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String> {
        Ok(text.to_string())
    }
}

/// Offline word-substitution translator for a single language pair.
///
/// Words found in the pair table are substituted; everything else passes
/// through. The reverse direction uses the inverted table, so a pair like
/// `("good", "gut")` round-trips exactly while asymmetric tables produce
/// genuine paraphrase-like drift.
pub struct DictionaryMt {
    source_lang: String,
    pivot_lang: String,
    forward: HashMap<String, String>,
    backward: HashMap<String, String>,
}

impl DictionaryMt {
    /// Build a translator for `source_lang <-> pivot_lang` from word pairs.
    ///
    /// When several source words share one pivot word, the *first* listed
    /// pair wins on the way back — that source form is the canonical one the
    /// round trip collapses its synonyms onto.
    pub fn new(source_lang: &str, pivot_lang: &str, pairs: &[(&str, &str)]) -> Self {
        let mut forward = HashMap::new();
        let mut backward = HashMap::new();
        for (s, p) in pairs {
            forward.entry(s.to_string()).or_insert_with(|| p.to_string());
            backward.entry(p.to_string()).or_insert_with(|| s.to_string());
        }
        DictionaryMt {
            source_lang: source_lang.to_string(),
            pivot_lang: pivot_lang.to_string(),
            forward,
            backward,
        }
    }
}

impl MtClient for DictionaryMt {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String> {
        let mapping = if source == self.source_lang && target == self.pivot_lang {
            &self.forward
        } else if source == self.pivot_lang && target == self.source_lang {
            &self.backward
        } else {
            return Err(Error::Config(format!(
                "dictionary translator only supports {} <-> {}, got {source} -> {target}",
                self.source_lang, self.pivot_lang
            )));
        };
        Ok(text
            .split_whitespace()
            .map(|w| mapping.get(w).map(String::as_str).unwrap_or(w))
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// HTTP translator speaking the `POST /translate` protocol:
/// `{"text", "source", "target"}` in, `{"text"}` out.
pub struct HttpMt {
    base_url: String,
    bearer: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpMt {
    /// Create a client for `base_url` (no trailing slash needed).
    pub fn new(base_url: impl Into<String>, bearer: Option<String>, retry: RetryPolicy) -> Self {
        HttpMt {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            bearer,
            agent: crate::http::agent(),
            retry,
        }
    }
}

impl MtClient for HttpMt {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String> {
        let url = format!("{}/translate", self.base_url);
        let body = serde_json::json!({ "text": text, "source": source, "target": target });
        let response = post_json(&self.agent, &url, self.bearer.as_deref(), &body, &self.retry)?;
        response
            .get("text")
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .ok_or_else(|| Error::Protocol(format!("{url} response is missing \"text\"")))
    }
}

/// A word-to-synonyms table, keyed by lowercased surface form.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// A lexicon with no entries; `synonym_replace` then applies zero edits.
    pub fn empty() -> Self {
        SynonymLexicon::default()
    }

    /// Build from `(word, candidates)` pairs, enforcing the file-format
    /// rules: non-empty keys and candidates, no whitespace inside either, no
    /// candidate equal to its key (case-insensitively), no duplicate keys.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut table: HashMap<String, Vec<String>> = HashMap::new();
        for (word, candidates) in entries {
            let key = word.to_lowercase();
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid lexicon key {word:?}")));
            }
            if candidates.is_empty() {
                return Err(Error::Config(format!(
                    "lexicon entry {word:?} has no candidates"
                )));
            }
            for c in &candidates {
                if c.is_empty() || c.chars().any(char::is_whitespace) {
                    return Err(Error::Config(format!(
                        "lexicon entry {word:?} has invalid candidate {c:?}"
                    )));
                }
                if c.to_lowercase() == key {
                    return Err(Error::Config(format!(
                        "lexicon entry {word:?} lists itself as a candidate"
                    )));
                }
            }
            if table.insert(key, candidates).is_some() {
                return Err(Error::Config(format!("duplicate lexicon key {word:?}")));
            }
        }
        Ok(SynonymLexicon { entries: table })
    }

    /// Parse the tab-separated lexicon format: one `word<TAB>syn1,syn2,...`
    /// entry per line; blank lines and `#` comments are ignored. `origin`
    /// names the source in error messages.
    pub fn from_tsv_str(content: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(2, '\t');
            let word = fields.next().unwrap_or("").trim();
            let Some(cands) = fields.next() else {
                return Err(Error::Config(format!(
                    "{origin}:{}: expected word<TAB>candidates",
                    lineno + 1
                )));
            };
            let candidates: Vec<String> = cands
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            entries.push((word.to_string(), candidates));
        }
        SynonymLexicon::from_entries(entries)
            .map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    /// Load a lexicon file in the tab-separated format.
    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        SynonymLexicon::from_tsv_str(&content, &path.display().to_string())
    }

    /// The small English lexicon bundled for tests and examples.
    pub fn bundled_test() -> Self {
        SynonymLexicon::from_tsv_str(
            include_str!("../assets/synonyms_test.tsv"),
            "bundled synonyms_test.tsv",
        )
        .expect("bundled lexicon is valid")
    }

    /// Whether `lowercased_word` has an entry.
    pub fn contains(&self, lowercased_word: &str) -> bool {
        self.entries.contains_key(lowercased_word)
    }

    /// Replacement candidates for `lowercased_word`.
    pub fn candidates(&self, lowercased_word: &str) -> Option<&[String]> {
        self.entries.get(lowercased_word).map(Vec::as_slice)
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the lexicon has no entries.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Derive the seed for one grid case from the global seed and the case
/// identity. Stable across runs, platforms, and case evaluation order.
pub fn case_seed(global_seed: u64, doc_id: &str, op: OpType, severity: Severity) -> u64 {
    derive_seed(global_seed, &[doc_id, op.name(), severity.label()])
}

/// Canonical case id: `<doc_id>::<op>@<severity>`.
pub fn case_id(doc_id: &str, op: OpType, severity: Severity) -> String {
    format!("{doc_id}::{}@{}", op.name(), severity.label())
}

/// An original/perturbed document pair plus the perturbation that links
/// them. The pairing is fixed by the case seed: every model evaluated
/// against the grid sees the same pairs.
#[derive(Debug, Clone)]
pub struct PairedCase {
    /// The unperturbed document.
    pub original: Document,
    /// The perturbed document (id carries a `::op@severity` suffix).
    pub perturbed: Document,
    /// The perturbation that produced it.
    pub config: PerturbationConfig,
}

/// How one grid cell turned out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseOutcome {
    /// The perturbation succeeded; the case is ready for evaluation.
    Ready {
        /// Perturbed text.
        perturbed_text: String,
        /// Edit budget the severity allowed.
        budget: usize,
        /// Edits actually applied.
        applied: usize,
        /// True for back-translation cells: the three severities replicate
        /// one transformation and must be aggregated with care.
        replicate: bool,
    },
    /// The perturbation could not produce usable text (currently only
    /// back-translation failures); the case is recorded and skipped.
    Skipped {
        /// Why the case was skipped.
        reason: String,
    },
}

/// One cell of the evaluation grid: a document crossed with an operator and
/// a severity. Serializes to a single JSONL line in a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    /// Canonical id: `<doc_id>::<op>@<severity>`.
    pub case_id: String,
    /// Source document id.
    pub doc_id: String,
    /// Operator family.
    pub op_type: OpType,
    /// Severity level.
    pub severity: Severity,
    /// Derived RNG seed for this cell.
    pub seed: u64,
    /// The unperturbed text.
    pub original_text: String,
    /// Perturbed text or skip reason.
    pub outcome: CaseOutcome,
}

impl GridCase {
    /// Materialize the original/perturbed document pair, or `None` for
    /// skipped cases.
    pub fn paired(&self) -> Result<Option<PairedCase>> {
        let CaseOutcome::Ready { perturbed_text, .. } = &self.outcome else {
            return Ok(None);
        };
        Ok(Some(PairedCase {
            original: Document::new(self.doc_id.clone(), self.original_text.clone())?,
            perturbed: Document::new(self.case_id.clone(), perturbed_text.clone())?,
            config: PerturbationConfig {
                op: self.op_type,
                severity: self.severity,
                seed: self.seed,
            },
        }))
    }
}

/// Everything the grid builder needs besides the documents.
pub struct GridPlan<'a> {
    /// Operators to evaluate, in the order cells should be emitted.
    pub operators: &'a [OpType],
    /// Severities to evaluate per operator.
    pub severities: &'a [Severity],
    /// Synonym table for `synonym_replace`.
    pub lexicon: &'a SynonymLexicon,
    /// Translator for `back_translate`.
    pub mt: &'a dyn MtClient,
    /// Source language code (e.g. "en").
    pub source_lang: &'a str,
    /// Pivot language code (e.g. "de").
    pub pivot_lang: &'a str,
    /// Root seed all case seeds derive from.
    pub global_seed: u64,
}

/// Apply one operator to a document, producing the perturbed text.
///
/// Infallible for the five local operators; back-translation propagates
/// translator errors.
// One argument per grid dimension plus the shared resources; bundling them
// into a struct would just duplicate `GridPlan` with a lifetime knot.
#[allow(clippy::too_many_arguments)]
pub fn apply_operator(
    doc: &Document,
    op: OpType,
    severity: Severity,
    seed: u64,
    lexicon: &SynonymLexicon,
    mt: &dyn MtClient,
    source_lang: &str,
    pivot_lang: &str,
) -> Result<TextOutcome> {
    Ok(match op {
        OpType::CharSwap => char_swap(&doc.text, severity, seed),
        OpType::CharDelete => char_delete(&doc.text, severity, seed),
        OpType::SynonymReplace => {
            let out = synonym_replace(&doc.words, severity, seed, lexicon);
            TextOutcome {
                text: detokenize(&out.words),
                budget: out.budget,
                applied: out.applied,
            }
        }
        OpType::WordDelete => {
            let out = word_delete(&doc.words, severity, seed);
            TextOutcome {
                text: detokenize(&out.words),
                budget: out.budget,
                applied: out.applied,
            }
        }
        OpType::WordShuffle => {
            let out = word_shuffle(&doc.words, severity, seed);
            TextOutcome {
                text: detokenize(&out.words),
                budget: out.budget,
                applied: out.applied,
            }
        }
        OpType::BackTranslate => {
            let text = back_translate(&doc.text, mt, source_lang, pivot_lang)?;
            TextOutcome {
                text,
                budget: 0,
                applied: 0,
            }
        }
    })
}

/// Build the full evaluation grid: every document crossed with every
/// (operator, severity) cell.
///
/// Back-translation is invoked once per document and its result shared by
/// that document's three replicate cells; a failed translation yields three
/// skipped cells rather than aborting the grid. Everything else is local
/// and cannot fail.
pub fn build_perturbation_grid(documents: &[Document], plan: &GridPlan<'_>) -> Vec<GridCase> {
    let mut cases =
        Vec::with_capacity(documents.len() * plan.operators.len() * plan.severities.len());
    for doc in documents {
        let mut bt_once: Option<Result<String>> = None;
        for &op in plan.operators {
            for &severity in plan.severities.iter() {
                let seed = case_seed(plan.global_seed, &doc.id, op, severity);
                let outcome = if op == OpType::BackTranslate {
                    let shared = bt_once.get_or_insert_with(|| {
                        back_translate(&doc.text, plan.mt, plan.source_lang, plan.pivot_lang)
                    });
                    match shared {
                        Ok(text) => CaseOutcome::Ready {
                            perturbed_text: text.clone(),
                            budget: 0,
                            applied: 0,
                            replicate: true,
                        },
                        Err(e) => CaseOutcome::Skipped {
                            reason: e.to_string(),
                        },
                    }
                } else {
                    match apply_operator(
                        doc,
                        op,
                        severity,
                        seed,
                        plan.lexicon,
                        plan.mt,
                        plan.source_lang,
                        plan.pivot_lang,
                    ) {
                        Ok(out) => CaseOutcome::Ready {
                            perturbed_text: out.text,
                            budget: out.budget,
                            applied: out.applied,
                            replicate: false,
                        },
                        Err(e) => CaseOutcome::Skipped {
                            reason: e.to_string(),
                        },
                    }
                };
                cases.push(GridCase {
                    case_id: case_id(&doc.id, op, severity),
                    doc_id: doc.id.clone(),
                    op_type: op,
                    severity,
                    seed,
                    original_text: doc.text.clone(),
                    outcome,
                });
            }
        }
    }
    cases
}
