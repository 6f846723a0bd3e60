//! Core text primitives and shared types.
//!
//! Everything downstream — perturbation operators, explainers, metrics —
//! agrees on one tokenization scheme and one set of data types, defined
//! here. Tokenization is deliberately plain: words are maximal runs of
//! non-whitespace, and detokenization joins with a single space. That makes
//! the round trip `tokenize(detokenize(words)) == words` exact for any word
//! list produced by [`tokenize`], which the perturbation pipeline relies on.

use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder text used when an occlusion or mask removes every word.
/// Sending a literally empty string to a classifier is ill-defined (and many
/// endpoints reject it), so the pipeline substitutes this fixed sentinel.
pub const EMPTY_TEXT_MARKER: &str = "[EMPTY]";

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    include_str!("../assets/stopwords_en.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

/// Split text into words: maximal runs of non-whitespace characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Join words back into text with single spaces.
///
/// For any `words` produced by [`tokenize`], `tokenize(&detokenize(words))`
/// returns `words` unchanged.
pub fn detokenize(words: &[String]) -> String {
    words.join(" ")
}

/// Whether a word counts as a content word.
///
/// The word is lowercased, non-alphanumeric characters are trimmed from both
/// ends (so `"good,"` and `"(good)"` reduce to `"good"`), and the result must
/// be non-empty and absent from the bundled English stopword list. Interior
/// punctuation survives the trim, so contractions like `"don't"` are matched
/// against the list as-is.
pub fn is_content_word(word: &str) -> bool {
    let lowered = word.to_lowercase();
    let core = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    !core.is_empty() && !STOPWORDS.contains(core)
}

/// Number of entries in the bundled stopword list (exposed for diagnostics).
pub fn stopword_count() -> usize {
    STOPWORDS.len()
}

/// An ordered set of class labels shared by a model and its predictions.
///
/// Order is significant: probability vectors index into it, and completion
/// surface forms align with it. At least two distinct, non-empty labels are
/// required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    /// Build a label set, rejecting duplicates, empty labels, and sets of
    /// fewer than two labels.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "label set needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::Config("label set contains an empty label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::Config(format!("duplicate label {label:?}")));
            }
        }
        Ok(LabelSet { labels })
    }

    /// The labels in declaration order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of labels (always at least 2).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; present for API completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `label`, if it belongs to the set.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Label at `index`. Panics if out of range; indices are only produced
    /// by predictions validated against this set.
    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;
    fn try_from(labels: Vec<String>) -> Result<Self> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Vec<String> {
        set.labels
    }
}

/// One text instance admitted to the pipeline.
///
/// `words` is always `tokenize(&text)`; construction fails if that is empty,
/// so every admitted document has at least one word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    /// Stable identifier (dataset-provided or generated at ingestion).
    pub id: String,
    /// Raw text as ingested.
    pub text: String,
    /// Tokenized form of `text`.
    pub words: Vec<String>,
}

impl Document {
    /// Admit a text instance. Fails with [`Error::InvalidInput`] if the text
    /// tokenizes to zero words.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let words = tokenize(&text);
        if words.is_empty() {
            return Err(Error::InvalidInput(format!(
                "document {id:?} has no words after tokenization"
            )));
        }
        Ok(Document { id, text, words })
    }

    /// Number of words in the document.
    pub fn word_count(&self) -> usize {
        self.words.len()
    }
}

/// A classifier output: a validated probability distribution over the
/// model's label set, plus the argmax index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Probability per label, aligned with the model's [`LabelSet`].
    pub probs: Vec<f64>,
    /// Index of the most probable label; ties break toward the lowest index.
    pub predicted_index: usize,
}

impl Prediction {
    /// Validate and wrap a probability vector.
    ///
    /// Probabilities must be finite, non-negative, and sum to 1 within
    /// `1e-6`; anything else is a protocol violation by whoever produced
    /// them.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Protocol("empty probability vector".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Protocol(format!(
                    "probability at index {i} is {p}, expected a finite non-negative value"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Protocol(format!(
                "probabilities sum to {sum}, expected 1 within 1e-6"
            )));
        }
        let mut predicted_index = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[predicted_index] {
                predicted_index = i;
            }
        }
        Ok(Prediction {
            probs,
            predicted_index,
        })
    }

    /// Probability assigned to the predicted label.
    pub fn confidence(&self) -> f64 {
        self.probs[self.predicted_index]
    }
}

/// Per-word importance scores with a deterministic ranking.
///
/// The ranking sorts by score descending and breaks exact ties by word
/// position ascending, so repeated constructions over equal scores can never
/// reorder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    scores: Vec<f64>,
    ranking: Vec<usize>,
}

impl Explanation {
    /// Rank a score vector. Fails if it is empty or contains non-finite
    /// values.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidInput("explanation has no scores".into()));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "importance score at index {i} is not finite"
            )));
        }
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_unstable_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("scores checked finite")
                .then(a.cmp(&b))
        });
        Ok(Explanation { scores, ranking })
    }

    /// Importance score per word position.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Word positions ordered from most to least important.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// Position of the most important word.
    pub fn top1_index(&self) -> usize {
        self.ranking[0]
    }

    /// `(position, score)` of the most important word.
    pub fn top1(&self) -> (usize, f64) {
        let idx = self.ranking[0];
        (idx, self.scores[idx])
    }

    /// The `min(k, n)` highest-ranked words, lowercased, in rank order.
    /// `words` must be the word list the explanation was computed over.
    pub fn topk_ranked_tokens(&self, k: usize, words: &[String]) -> Result<Vec<String>> {
        if words.len() != self.scores.len() {
            return Err(Error::InvalidInput(format!(
                "explanation covers {} words but {} were supplied",
                self.scores.len(),
                words.len()
            )));
        }
        Ok(self
            .ranking
            .iter()
            .take(k)
            .map(|&i| words[i].to_lowercase())
            .collect())
    }

    /// The `min(k, n)` highest-ranked words as a lowercased token set.
    /// Duplicate words collapse, so the set may be smaller than `min(k, n)`.
    pub fn topk_token_set(&self, k: usize, words: &[String]) -> Result<BTreeSet<String>> {
        Ok(self.topk_ranked_tokens(k, words)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_any_whitespace() {
        assert_eq!(
            tokenize("a  b\tc\nd"),
            vec!["a".to_string(), "b".into(), "c".into(), "d".into()]
        );
        assert!(tokenize("   \t\n").is_empty());
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn detokenize_round_trips_token_lists() {
        let words = tokenize("The  quick\tbrown fox");
        assert_eq!(tokenize(&detokenize(&words)), words);
        assert_eq!(detokenize(&words), "The quick brown fox");
    }

    #[test]
    fn content_word_trims_edges_and_checks_stopwords() {
        assert!(is_content_word("good"));
        assert!(is_content_word("Good,"));
        assert!(is_content_word("(excellent)"));
        assert!(!is_content_word("the"));
        assert!(!is_content_word("The."));
        assert!(!is_content_word("don't"));
        assert!(!is_content_word("..."));
        assert!(!is_content_word(""));
        assert!(is_content_word("42"));
    }

    #[test]
    fn stopword_list_is_bundled() {
        assert!(stopword_count() >= 140, "stopword list looks truncated");
    }

    #[test]
    fn label_set_rejects_bad_inputs() {
        assert!(LabelSet::new(["only"]).is_err());
        assert!(LabelSet::new(["a", "a"]).is_err());
        assert!(LabelSet::new(["a", ""]).is_err());
        let set = LabelSet::new(["neg", "pos"]).unwrap();
        assert_eq!(set.index_of("pos"), Some(1));
        assert_eq!(set.index_of("neutral"), None);
        assert_eq!(set.label(0), "neg");
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn document_rejects_whitespace_only_text() {
        assert!(Document::new("d0", "  \t ").is_err());
        let doc = Document::new("d1", " hello  world ").unwrap();
        assert_eq!(doc.words, vec!["hello".to_string(), "world".into()]);
        assert_eq!(doc.word_count(), 2);
    }

    #[test]
    fn prediction_validates_distribution() {
        assert!(Prediction::from_probs(vec![]).is_err());
        assert!(Prediction::from_probs(vec![0.5, f64::NAN]).is_err());
        assert!(Prediction::from_probs(vec![-0.1, 1.1]).is_err());
        assert!(Prediction::from_probs(vec![0.6, 0.6]).is_err());
        let p = Prediction::from_probs(vec![0.3, 0.7]).unwrap();
        assert_eq!(p.predicted_index, 1);
        assert!((p.confidence() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn prediction_argmax_ties_break_low() {
        let p = Prediction::from_probs(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(p.predicted_index, 0);
        let p = Prediction::from_probs(vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(p.predicted_index, 1);
    }

    #[test]
    fn explanation_ranking_is_deterministic_under_ties() {
        let e = Explanation::new(vec![0.5, 0.9, 0.5, 0.1]).unwrap();
        assert_eq!(e.ranking(), &[1, 0, 2, 3]);
        assert_eq!(e.top1_index(), 1);
        let again = Explanation::new(vec![0.5, 0.9, 0.5, 0.1]).unwrap();
        assert_eq!(e.ranking(), again.ranking());
    }

    #[test]
    fn explanation_rejects_non_finite_scores() {
        assert!(Explanation::new(vec![0.1, f64::INFINITY]).is_err());
        assert!(Explanation::new(vec![]).is_err());
    }

    #[test]
    fn topk_tokens_lowercase_and_truncate() {
        let words = tokenize("Alpha Beta Gamma");
        let e = Explanation::new(vec![0.1, 0.9, 0.5]).unwrap();
        assert_eq!(
            e.topk_ranked_tokens(2, &words).unwrap(),
            vec!["beta".to_string(), "gamma".into()]
        );
        assert_eq!(e.topk_ranked_tokens(10, &words).unwrap().len(), 3);
        let set = e.topk_token_set(5, &words).unwrap();
        assert!(set.contains("alpha"));
        assert!(e.topk_ranked_tokens(2, &words[..2]).is_err());
    }
}
