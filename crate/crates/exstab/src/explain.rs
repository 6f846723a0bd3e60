//! Black-box word-importance explainers.
//!
//! Both explainers treat the model as an opaque probability oracle and
//! attribute importance to word positions of the *unperturbed tokenization*:
//!
//! * [`explain_loo`] — leave-one-out occlusion. Word `i` scores the drop in
//!   the predicted-class probability when word `i` is removed:
//!   `score[i] = P(c | full text) - P(c | text without word i)`, where `c`
//!   is the class predicted on the full text. Costs exactly `n + 1` queries
//!   for an `n`-word document.
//! * [`explain_surrogate`] — a local linear surrogate fit on seeded binary
//!   masks (keep/drop per word), with proximity kernel weights and a
//!   weighted least-squares solve. Costs `num_samples + 1` queries.
//!
//! The class whose probability is tracked is fixed by the full-input
//! prediction of the text being explained; occlusions that would flip the
//! prediction still report that class's probability. When every word is
//! removed, the query text is the [`EMPTY_TEXT_MARKER`] sentinel, never the
//! empty string.

use serde::{Deserialize, Serialize};

use crate::core::{detokenize, Document, Explanation, EMPTY_TEXT_MARKER};
use crate::error::{Error, Result};
use crate::modelclient::TextClassifier;
use crate::seed::rng_from_seed;
use rand::Rng;

/// Which explainer a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerMethod {
    /// Leave-one-out occlusion.
    Loo,
    /// Sampled local linear surrogate.
    Surrogate,
}

impl ExplainerMethod {
    /// Wire name, as used in configs.
    pub fn name(self) -> &'static str {
        match self {
            ExplainerMethod::Loo => "loo",
            ExplainerMethod::Surrogate => "surrogate",
        }
    }
}

/// Text with the word at `skip` removed; the sentinel if nothing remains.
pub fn occluded_text(words: &[String], skip: usize) -> String {
    if words.len() <= 1 {
        return EMPTY_TEXT_MARKER.to_string();
    }
    let kept: Vec<String> = words
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, w)| w.clone())
        .collect();
    detokenize(&kept)
}

/// The exact query texts a leave-one-out explanation sends, in order: the
/// full text, then one occlusion per word position.
///
/// This is the authoritative list for query accounting: its length is
/// `n + 1`, and the evaluation runner derives logical query counts from it.
pub fn loo_query_texts(doc: &Document) -> Vec<String> {
    let mut texts = Vec::with_capacity(doc.words.len() + 1);
    texts.push(doc.text.clone());
    for i in 0..doc.words.len() {
        texts.push(occluded_text(&doc.words, i));
    }
    texts
}

/// Leave-one-out occlusion explanation.
///
/// Sends `n + 1` queries (matching [`loo_query_texts`]); any query error
/// aborts the whole explanation.
pub fn explain_loo(model: &dyn TextClassifier, doc: &Document) -> Result<Explanation> {
    let full = model.predict(&doc.text)?;
    let class = full.predicted_index;
    let base = full.confidence();
    let mut scores = Vec::with_capacity(doc.words.len());
    for i in 0..doc.words.len() {
        let occluded = model.predict(&occluded_text(&doc.words, i))?;
        scores.push(base - occluded.probs[class]);
    }
    Explanation::new(scores)
}

/// Sampling and kernel parameters for the surrogate explainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// Number of masks evaluated (the all-ones mask plus sampled ones).
    pub num_samples: usize,
    /// Kernel bandwidth for proximity weights.
    pub kernel_width: f64,
    /// Per-word keep probability when sampling masks.
    pub mask_probability: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            num_samples: 200,
            kernel_width: 0.75,
            mask_probability: 0.5,
        }
    }
}

impl SurrogateParams {
    /// Check the parameters against a document of `word_count` words.
    ///
    /// The weighted least-squares fit estimates `word_count + 1` unknowns,
    /// so `num_samples` must be at least `word_count + 2`.
    pub fn validate(&self, word_count: usize) -> Result<()> {
        if self.num_samples < word_count + 2 {
            return Err(Error::InvalidInput(format!(
                "num_samples = {} cannot fit {} words; need at least {}",
                self.num_samples,
                word_count,
                word_count + 2
            )));
        }
        if !(self.kernel_width.is_finite() && self.kernel_width > 0.0) {
            return Err(Error::Config(format!(
                "kernel_width must be positive, got {}",
                self.kernel_width
            )));
        }
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            return Err(Error::Config(format!(
                "mask_probability must be in (0, 1), got {}",
                self.mask_probability
            )));
        }
        Ok(())
    }

    /// Document-independent validation (for config checking, before any
    /// document is seen). Per-document sample sufficiency is still checked
    /// by [`SurrogateParams::validate`] at explanation time.
    pub fn validate_static(&self) -> Result<()> {
        self.validate(1)
    }
}

/// Proximity weight of a mask that keeps `overlap_fraction` of the words:
/// `exp(-(1 - overlap)^2 / kernel_width^2)`. The all-ones mask weighs 1.
pub fn kernel_weight(overlap_fraction: f64, kernel_width: f64) -> f64 {
    let d = 1.0 - overlap_fraction;
    (-(d * d) / (kernel_width * kernel_width)).exp()
}

/// Render a mask into query text: kept words joined by spaces, or the
/// [`EMPTY_TEXT_MARKER`] when the mask drops everything.
pub fn mask_text(words: &[String], mask: &[bool]) -> String {
    let kept: Vec<String> = words
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(w, _)| w.clone())
        .collect();
    if kept.is_empty() {
        EMPTY_TEXT_MARKER.to_string()
    } else {
        detokenize(&kept)
    }
}

/// The seeded mask set for an `n`-word document: the all-ones mask first,
/// then `num_samples - 1` masks with each word kept independently with
/// probability `mask_probability`.
pub fn surrogate_masks(
    word_count: usize,
    params: &SurrogateParams,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    params.validate(word_count)?;
    let mut rng = rng_from_seed(seed);
    let mut masks = Vec::with_capacity(params.num_samples);
    masks.push(vec![true; word_count]);
    for _ in 1..params.num_samples {
        let mask: Vec<bool> = (0..word_count)
            .map(|_| rng.random_range(0.0..1.0) < params.mask_probability)
            .collect();
        masks.push(mask);
    }
    Ok(masks)
}

/// Every possible mask over `word_count` words, in binary counting order
/// with the all-ones mask first. Only sensible for small documents; the
/// count is `2^word_count` and `word_count > 20` is rejected.
pub fn exhaustive_masks(word_count: usize) -> Result<Vec<Vec<bool>>> {
    if word_count > 20 {
        return Err(Error::InvalidInput(format!(
            "exhaustive masks over {word_count} words would need 2^{word_count} queries"
        )));
    }
    let total = 1usize << word_count;
    let mut masks = Vec::with_capacity(total);
    for code in (0..total).rev() {
        masks.push((0..word_count).map(|i| code >> i & 1 == 1).collect());
    }
    Ok(masks)
}

/// A weight of 1 for every mask (no proximity kernel).
pub fn uniform_weights(len: usize) -> Vec<f64> {
    vec![1.0; len]
}

/// The exact query texts a surrogate explanation sends, in order: the full
/// text, then one render per mask. Length `num_samples + 1`.
pub fn surrogate_query_texts(
    doc: &Document,
    params: &SurrogateParams,
    seed: u64,
) -> Result<Vec<String>> {
    let masks = surrogate_masks(doc.words.len(), params, seed)?;
    let mut texts = Vec::with_capacity(masks.len() + 1);
    texts.push(doc.text.clone());
    for mask in &masks {
        texts.push(mask_text(&doc.words, mask));
    }
    Ok(texts)
}

/// A surrogate explanation plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct SurrogateExplanation {
    /// Per-word importances (the fitted linear coefficients).
    pub explanation: Explanation,
    /// True when the plain weighted least-squares system was singular and
    /// ridge regularization (lambda = 1e-6) was applied instead.
    pub ridge_fallback: bool,
}

/// Surrogate explanation with seeded mask sampling; see [`explain_surrogate_with_masks`].
pub fn explain_surrogate(
    model: &dyn TextClassifier,
    doc: &Document,
    params: &SurrogateParams,
    seed: u64,
) -> Result<SurrogateExplanation> {
    let masks = surrogate_masks(doc.words.len(), params, seed)?;
    let weights: Vec<f64> = masks
        .iter()
        .map(|m| {
            let kept = m.iter().filter(|&&b| b).count();
            kernel_weight(kept as f64 / doc.words.len() as f64, params.kernel_width)
        })
        .collect();
    explain_surrogate_with_masks(model, doc, &masks, &weights)
}

/// Fit a local linear surrogate on caller-supplied masks and weights.
///
/// Queries the model once for the full text (fixing the explained class)
/// and once per mask, then solves a weighted least-squares fit of the
/// class probability against mask bits (with intercept). The fitted
/// coefficients are the importance scores. A singular system falls back to
/// ridge regularization with `lambda = 1e-6`, reported via
/// [`SurrogateExplanation::ridge_fallback`].
///
/// At least `word_count + 1` masks are required (exactly determined system);
/// sampled pipelines should provide `word_count + 2` or more.
pub fn explain_surrogate_with_masks(
    model: &dyn TextClassifier,
    doc: &Document,
    masks: &[Vec<bool>],
    weights: &[f64],
) -> Result<SurrogateExplanation> {
    let n = doc.words.len();
    if masks.len() < n + 1 {
        return Err(Error::InvalidInput(format!(
            "{} masks cannot determine {} coefficients",
            masks.len(),
            n + 1
        )));
    }
    if masks.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} masks but {} weights",
            masks.len(),
            weights.len()
        )));
    }
    if let Some(bad) = masks.iter().position(|m| m.len() != n) {
        return Err(Error::InvalidInput(format!(
            "mask {bad} has {} bits for {n} words",
            masks[bad].len()
        )));
    }
    if let Some(bad) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput(format!(
            "weight {bad} is {}, expected finite and non-negative",
            weights[bad]
        )));
    }

    let full = model.predict(&doc.text)?;
    let class = full.predicted_index;

    let mut targets = Vec::with_capacity(masks.len());
    for mask in masks {
        let pred = model.predict(&mask_text(&doc.words, mask))?;
        targets.push(pred.probs[class]);
    }

    // Normal equations for X = [1 | mask bits], solved at (n+1) x (n+1).
    let dim = n + 1;
    let mut ata = vec![0.0f64; dim * dim];
    let mut atb = vec![0.0f64; dim];
    let mut row = vec![0.0f64; dim];
    for (mask, (&w, &y)) in masks.iter().zip(weights.iter().zip(&targets)) {
        row[0] = 1.0;
        for (j, &bit) in mask.iter().enumerate() {
            row[j + 1] = if bit { 1.0 } else { 0.0 };
        }
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            let wi = w * row[i];
            for j in 0..dim {
                ata[i * dim + j] += wi * row[j];
            }
            atb[i] += wi * y;
        }
    }

    let (coefficients, ridge_fallback) = match solve_symmetric(&ata, &atb, dim) {
        Some(beta) => (beta, false),
        None => {
            const RIDGE_LAMBDA: f64 = 1e-6;
            let mut regularized = ata.clone();
            for i in 0..dim {
                regularized[i * dim + i] += RIDGE_LAMBDA;
            }
            let beta = solve_symmetric(&regularized, &atb, dim).ok_or_else(|| {
                Error::InvalidInput("surrogate system is singular even with ridge".into())
            })?;
            (beta, true)
        }
    };

    Ok(SurrogateExplanation {
        explanation: Explanation::new(coefficients[1..].to_vec())?,
        ridge_fallback,
    })
}

/// Gaussian elimination with partial pivoting; `None` when the system is
/// singular at working precision.
fn solve_symmetric(matrix: &[f64], rhs: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    let scale = a
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    let tol = 1e-12 * scale;
    for col in 0..dim {
        let mut pivot_row = col;
        for r in col + 1..dim {
            if a[r * dim + col].abs() > a[pivot_row * dim + col].abs() {
                pivot_row = r;
            }
        }
        if a[pivot_row * dim + col].abs() < tol {
            return None;
        }
        if pivot_row != col {
            for c in 0..dim {
                a.swap(col * dim + c, pivot_row * dim + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * dim + col];
        for r in col + 1..dim {
            let factor = a[r * dim + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..dim {
                a[r * dim + c] -= factor * a[col * dim + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; dim];
    for col in (0..dim).rev() {
        let mut acc = b[col];
        for c in col + 1..dim {
            acc -= a[col * dim + c] * x[c];
        }
        x[col] = acc / a[col * dim + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Query budget of one explanation over a `word_count`-word document.
pub fn explanation_query_cost(
    method: ExplainerMethod,
    word_count: usize,
    params: &SurrogateParams,
) -> usize {
    match method {
        ExplainerMethod::Loo => word_count + 1,
        ExplainerMethod::Surrogate => params.num_samples + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{LabelSet, Prediction};
    use crate::modelclient::{sigmoid, ToyModel};

    fn toy() -> ToyModel {
        ToyModel::new(
            "toy",
            LabelSet::new(["pos", "neg"]).unwrap(),
            [
                ("good".to_string(), 1.0),
                ("great".to_string(), 2.0),
                ("bad".to_string(), -1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn occlusion_texts_cover_each_position_once() {
        let doc = Document::new("d", "alpha beta gamma").unwrap();
        let texts = loo_query_texts(&doc);
        assert_eq!(
            texts,
            vec![
                "alpha beta gamma".to_string(),
                "beta gamma".into(),
                "alpha gamma".into(),
                "alpha beta".into(),
            ]
        );
    }

    #[test]
    fn single_word_occlusion_uses_the_sentinel() {
        let doc = Document::new("d", "alone").unwrap();
        let texts = loo_query_texts(&doc);
        assert_eq!(texts, vec!["alone".to_string(), EMPTY_TEXT_MARKER.into()]);
    }

    #[test]
    fn loo_matches_the_toy_closed_form() {
        // "good bad day": logit 0, class = pos (tie to index 0), base 0.5.
        // Removing "good" leaves logit -1; removing "bad" leaves +1;
        // removing "day" changes nothing.
        let doc = Document::new("d", "good bad day").unwrap();
        let model = toy();
        let e = explain_loo(&model, &doc).unwrap();
        let expect = [
            0.5 - sigmoid(-1.0),
            0.5 - sigmoid(1.0),
            0.0,
        ];
        for (got, want) in e.scores().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(e.top1_index(), 0);
        assert_eq!(e.ranking(), &[0, 2, 1]);
    }

    #[test]
    fn loo_tracks_the_original_class_when_the_minority_label_wins() {
        // "bad bad good": logit -1, predicted class is neg (index 1),
        // P(neg) = 1 - sigmoid(-1) = sigmoid(1).
        let doc = Document::new("d", "bad bad good").unwrap();
        let e = explain_loo(&toy(), &doc).unwrap();
        let base = sigmoid(1.0);
        // Removing a "bad" leaves logit 0 -> P(neg) = 0.5.
        assert!((e.scores()[0] - (base - 0.5)).abs() < 1e-12);
        // Removing "good" leaves logit -2 -> P(neg) = sigmoid(2).
        assert!((e.scores()[2] - (base - sigmoid(2.0))).abs() < 1e-12);
        assert_eq!(e.top1_index(), 0, "ties break to the leftmost bad");
    }

    #[test]
    fn surrogate_masks_start_with_all_ones_and_are_seeded() {
        let params = SurrogateParams {
            num_samples: 10,
            ..SurrogateParams::default()
        };
        let masks = surrogate_masks(4, &params, 9).unwrap();
        assert_eq!(masks.len(), 10);
        assert_eq!(masks[0], vec![true; 4]);
        assert_eq!(masks, surrogate_masks(4, &params, 9).unwrap());
        assert_ne!(masks, surrogate_masks(4, &params, 10).unwrap());
    }

    #[test]
    fn surrogate_rejects_underdetermined_sampling() {
        let params = SurrogateParams {
            num_samples: 5,
            ..SurrogateParams::default()
        };
        assert!(params.validate(3).is_ok());
        assert!(params.validate(4).is_err());
    }

    #[test]
    fn mask_text_renders_kept_words_or_sentinel() {
        let words = vec!["a".to_string(), "b".into(), "c".into()];
        assert_eq!(mask_text(&words, &[true, false, true]), "a c");
        assert_eq!(mask_text(&words, &[false, false, false]), EMPTY_TEXT_MARKER);
    }

    #[test]
    fn exhaustive_masks_enumerate_all_subsets() {
        let masks = exhaustive_masks(3).unwrap();
        assert_eq!(masks.len(), 8);
        assert_eq!(masks[0], vec![true, true, true]);
        let unique: std::collections::HashSet<Vec<bool>> = masks.iter().cloned().collect();
        assert_eq!(unique.len(), 8);
        assert!(exhaustive_masks(21).is_err());
    }

    #[test]
    fn kernel_weight_peaks_at_full_overlap() {
        assert!((kernel_weight(1.0, 0.75) - 1.0).abs() < 1e-15);
        assert!(kernel_weight(0.5, 0.75) < 1.0);
        assert!(kernel_weight(0.0, 0.75) < kernel_weight(0.5, 0.75));
    }

    /// A model whose class-0 probability is exactly linear in the presence
    /// of specific words, so the surrogate fit should recover the
    /// coefficients to numerical precision.
    struct LinearProbe {
        labels: LabelSet,
    }

    impl crate::modelclient::TextClassifier for LinearProbe {
        fn name(&self) -> &str {
            "linear-probe"
        }
        fn label_set(&self) -> &LabelSet {
            &self.labels
        }
        fn predict(&self, text: &str) -> Result<Prediction> {
            let has = |w: &str| text.split_whitespace().any(|t| t == w);
            let p0 = 0.1 + 0.3 * f64::from(has("alpha")) + 0.2 * f64::from(has("beta"));
            Prediction::from_probs(vec![p0, 1.0 - p0])
        }
    }

    #[test]
    fn surrogate_recovers_exact_linear_coefficients() {
        let doc = Document::new("d", "alpha beta").unwrap();
        let model = LinearProbe {
            labels: LabelSet::new(["pos", "neg"]).unwrap(),
        };
        let masks = exhaustive_masks(2).unwrap();
        let weights = uniform_weights(masks.len());
        let fit = explain_surrogate_with_masks(&model, &doc, &masks, &weights).unwrap();
        assert!(!fit.ridge_fallback);
        let scores = fit.explanation.scores();
        assert!((scores[0] - 0.3).abs() < 1e-10, "alpha: {}", scores[0]);
        assert!((scores[1] - 0.2).abs() < 1e-10, "beta: {}", scores[1]);
    }

    #[test]
    fn surrogate_and_loo_agree_on_a_toy_document() {
        let doc = Document::new("d", "great good bad").unwrap();
        let model = toy();
        let loo = explain_loo(&model, &doc).unwrap();
        let masks = exhaustive_masks(3).unwrap();
        let weights = uniform_weights(masks.len());
        let fit = explain_surrogate_with_masks(&model, &doc, &masks, &weights).unwrap();
        assert_eq!(fit.explanation.top1_index(), loo.top1_index());
    }

    #[test]
    fn collinear_masks_trigger_the_ridge_fallback() {
        let doc = Document::new("d", "alpha beta").unwrap();
        let model = LinearProbe {
            labels: LabelSet::new(["pos", "neg"]).unwrap(),
        };
        // Five copies of the same mask: rank 1, hopelessly singular.
        let masks = vec![vec![true, false]; 5];
        let weights = uniform_weights(5);
        let fit = explain_surrogate_with_masks(&model, &doc, &masks, &weights).unwrap();
        assert!(fit.ridge_fallback);
        assert!(fit.explanation.scores().iter().all(|s| s.is_finite()));
    }

    #[test]
    fn query_texts_match_the_advertised_budget() {
        let doc = Document::new("d", "one two three four five six").unwrap();
        let params = SurrogateParams {
            num_samples: 12,
            ..SurrogateParams::default()
        };
        assert_eq!(loo_query_texts(&doc).len(), 7);
        assert_eq!(
            surrogate_query_texts(&doc, &params, 3).unwrap().len(),
            13
        );
        assert_eq!(
            explanation_query_cost(ExplainerMethod::Loo, 6, &params),
            7
        );
        assert_eq!(
            explanation_query_cost(ExplainerMethod::Surrogate, 6, &params),
            13
        );
    }

    #[test]
    fn full_surrogate_pipeline_runs_on_the_toy_model() {
        let doc = Document::new("d", "great good bad day").unwrap();
        let params = SurrogateParams {
            num_samples: 64,
            ..SurrogateParams::default()
        };
        let fit = explain_surrogate(&toy(), &doc, &params, 77).unwrap();
        assert_eq!(fit.explanation.scores().len(), 4);
        // "great" carries twice the weight of "good"; with 64 samples the
        // surrogate should agree it is the top word.
        assert_eq!(fit.explanation.top1_index(), 0);
        let again = explain_surrogate(&toy(), &doc, &params, 77).unwrap();
        assert_eq!(fit.explanation, again.explanation);
    }
}
