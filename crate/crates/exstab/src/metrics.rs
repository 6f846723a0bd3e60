//! Stability metrics over evaluation records.
//!
//! One [`RunRecord`] captures a single (model, case) evaluation: the
//! original and perturbed predictions plus both explanations' top-ranked
//! words. The metrics quantify how much the explanation and the prediction
//! moved:
//!
//! * **flip rate** — fraction of cases whose top-1 word changed. The
//!   comparison is by lowercased token *string*, not position, so an
//!   explanation that follows the same word to a new position does not
//!   count as a flip.
//! * **top-k overlap** — Jaccard similarity of the lowercased top-k token
//!   sets.
//! * **prediction consistency** — fraction of cases where the predicted
//!   label survived the perturbation.
//! * **prediction-consistent flip rate** — flip rate restricted to the
//!   label-consistent subset, reported together with that subset's size.
//!
//! Interval estimates come from [`paired_bootstrap_ci`], a seeded
//! percentile bootstrap that resamples whole records, preserving the
//! original/perturbed pairing inside each record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::{OpType, Severity};
use crate::seed::{derive_seed, rng_from_seed};
use rand::Rng;

/// A predicted label with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfidence {
    /// Predicted label.
    pub label: String,
    /// Probability the model assigned to it.
    pub confidence: f64,
}

/// The most important word of one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopToken {
    /// Word position in the explained text.
    pub index: usize,
    /// The word itself, in its original casing.
    pub token: String,
    /// Its importance score.
    pub score: f64,
}

/// How one case evaluation ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordStatus {
    /// Both sides were predicted and explained.
    Ok,
    /// The perturbation could not produce usable text; nothing was queried.
    Skipped {
        /// Why the case was skipped.
        reason: String,
    },
    /// A model query failed while evaluating the case.
    Failed {
        /// The error that aborted the evaluation.
        reason: String,
    },
}

/// One (model, case) evaluation, as persisted to `records.jsonl`.
///
/// Skipped and failed records keep the identity fields and carry `null` for
/// everything evaluation would have produced. `query_count` is the logical
/// query budget the case contributed — a pure function of the grid, not of
/// runtime cache state, so reruns and resumed runs report identical counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Model name.
    pub model: String,
    /// Grid case id (`<doc_id>::<op>@<severity>`).
    pub case_id: String,
    /// Operator family.
    pub op_type: OpType,
    /// Severity level.
    pub severity: Severity,
    /// Outcome of the evaluation.
    pub status: RecordStatus,
    /// Unperturbed text.
    pub original_text: String,
    /// Perturbed text (`null` for skipped cases).
    pub perturbed_text: Option<String>,
    /// Prediction on the original text.
    pub original_pred: Option<LabelConfidence>,
    /// Prediction on the perturbed text.
    pub perturbed_pred: Option<LabelConfidence>,
    /// Top-1 word of the original explanation.
    pub original_top1: Option<TopToken>,
    /// Top-1 word of the perturbed explanation.
    pub perturbed_top1: Option<TopToken>,
    /// Top-ranked words (lowercased, rank order, up to 5) of the original
    /// explanation.
    pub original_topk_tokens: Option<Vec<String>>,
    /// Top-ranked words of the perturbed explanation.
    pub perturbed_topk_tokens: Option<Vec<String>>,
    /// Logical queries this case accounts for.
    pub query_count: u64,
}

impl RunRecord {
    /// Whether the case completed evaluation.
    pub fn is_ok(&self) -> bool {
        matches!(self.status, RecordStatus::Ok)
    }
}

fn ok_records(records: &[RunRecord]) -> impl Iterator<Item = &RunRecord> {
    records.iter().filter(|r| r.is_ok())
}

/// Whether the explanation's top-1 word changed under perturbation.
///
/// Compares lowercased token strings, independent of position. Defined only
/// for ok records.
pub fn flipped(record: &RunRecord) -> Result<bool> {
    if !record.is_ok() {
        return Err(Error::UndefinedMetric(format!(
            "flip is undefined for case {} with non-ok status",
            record.case_id
        )));
    }
    match (&record.original_top1, &record.perturbed_top1) {
        (Some(orig), Some(pert)) => Ok(orig.token.to_lowercase() != pert.token.to_lowercase()),
        _ => Err(Error::InvalidInput(format!(
            "ok record {} is missing top-1 data",
            record.case_id
        ))),
    }
}

/// Fraction of ok records whose top-1 word flipped.
///
/// Undefined (error) when no record is ok.
pub fn flip_rate(records: &[RunRecord]) -> Result<f64> {
    let mut flips = 0usize;
    let mut total = 0usize;
    for record in ok_records(records) {
        if flipped(record)? {
            flips += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "flip rate over zero evaluated records".into(),
        ));
    }
    Ok(flips as f64 / total as f64)
}

/// Jaccard overlap of the two explanations' top-k token sets for one
/// record.
///
/// Token lists are stored lowercased in rank order; the first
/// `min(k, stored)` of each side form the sets. Two empty sets overlap
/// perfectly (1.0).
pub fn topk_overlap(record: &RunRecord, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("top-k overlap needs k >= 1".into()));
    }
    if !record.is_ok() {
        return Err(Error::UndefinedMetric(format!(
            "top-k overlap is undefined for case {} with non-ok status",
            record.case_id
        )));
    }
    let (Some(orig), Some(pert)) = (&record.original_topk_tokens, &record.perturbed_topk_tokens)
    else {
        return Err(Error::InvalidInput(format!(
            "ok record {} is missing top-k tokens",
            record.case_id
        )));
    };
    let a: std::collections::BTreeSet<&str> =
        orig.iter().take(k).map(String::as_str).collect();
    let b: std::collections::BTreeSet<&str> =
        pert.iter().take(k).map(String::as_str).collect();
    if a.is_empty() && b.is_empty() {
        return Ok(1.0);
    }
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    Ok(intersection as f64 / union as f64)
}

/// Mean top-k overlap over the ok records. Undefined when none are ok.
pub fn mean_topk_overlap(records: &[RunRecord], k: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut total = 0usize;
    for record in ok_records(records) {
        sum += topk_overlap(record, k)?;
        total += 1;
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "top-k overlap over zero evaluated records".into(),
        ));
    }
    Ok(sum / total as f64)
}

/// Whether the predicted label survived the perturbation for one record.
pub fn prediction_consistent(record: &RunRecord) -> Result<bool> {
    if !record.is_ok() {
        return Err(Error::UndefinedMetric(format!(
            "prediction consistency is undefined for case {} with non-ok status",
            record.case_id
        )));
    }
    match (&record.original_pred, &record.perturbed_pred) {
        (Some(orig), Some(pert)) => Ok(orig.label == pert.label),
        _ => Err(Error::InvalidInput(format!(
            "ok record {} is missing predictions",
            record.case_id
        ))),
    }
}

/// Fraction of ok records whose predicted label survived the perturbation.
pub fn prediction_consistency(records: &[RunRecord]) -> Result<f64> {
    let mut consistent = 0usize;
    let mut total = 0usize;
    for record in ok_records(records) {
        if prediction_consistent(record)? {
            consistent += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "prediction consistency over zero evaluated records".into(),
        ));
    }
    Ok(consistent as f64 / total as f64)
}

/// Flip rate restricted to the label-consistent subset, plus that subset's
/// size. Undefined when the subset is empty.
pub fn pred_consistent_flip_rate(records: &[RunRecord]) -> Result<(f64, usize)> {
    let mut flips = 0usize;
    let mut total = 0usize;
    for record in ok_records(records) {
        if prediction_consistent(record)? {
            if flipped(record)? {
                flips += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "prediction-consistent flip rate over an empty subset".into(),
        ));
    }
    Ok((flips as f64 / total as f64, total))
}

/// Maximum redraw factor before a bootstrap gives up on resamples where the
/// statistic is undefined.
const BOOTSTRAP_REDRAW_FACTOR: usize = 10;

/// Seeded percentile bootstrap confidence interval.
///
/// Draws `iterations` resamples of `items` (with replacement, whole items —
/// for paired data each item carries both sides of the pair), evaluates
/// `statistic` on each, and returns the nearest-rank percentile interval at
/// the given confidence `level`. Resamples where the statistic is undefined
/// (`None`) are redrawn; if redraws exceed `10 * iterations`, the statistic
/// is effectively undefined on this data and an error is returned.
///
/// Requires at least two items, so the resampling distribution is not
/// degenerate by construction.
pub fn paired_bootstrap_ci<T, F>(
    items: &[T],
    statistic: F,
    iterations: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[&T]) -> Option<f64>,
{
    if items.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least 2 items, got {}",
            items.len()
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidInput("bootstrap needs iterations >= 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }

    let n = items.len();
    let mut rng = rng_from_seed(seed);
    let mut stats = Vec::with_capacity(iterations);
    let mut resample: Vec<&T> = Vec::with_capacity(n);
    let mut redraws = 0usize;
    let redraw_cap = iterations.saturating_mul(BOOTSTRAP_REDRAW_FACTOR);
    while stats.len() < iterations {
        resample.clear();
        for _ in 0..n {
            resample.push(&items[rng.random_range(0..n)]);
        }
        match statistic(&resample) {
            Some(value) => stats.push(value),
            None => {
                redraws += 1;
                if redraws > redraw_cap {
                    return Err(Error::UndefinedMetric(format!(
                        "statistic was undefined on {redraws} resamples (cap {redraw_cap})"
                    )));
                }
            }
        }
    }
    stats.sort_unstable_by(|a, b| a.partial_cmp(b).expect("statistics are comparable"));

    let alpha = (1.0 - level) / 2.0;
    let lo = stats[nearest_rank(alpha, iterations) - 1];
    let hi = stats[nearest_rank(1.0 - alpha, iterations) - 1];
    Ok((lo, hi))
}

/// Nearest-rank percentile position (1-based): `ceil(q * n)`, clamped to
/// `[1, n]`. A small epsilon absorbs float error in `q * n` so lattice
/// points like `0.025 * 10000` land on 250, not 251.
fn nearest_rank(q: f64, n: usize) -> usize {
    let rank = (q * n as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, n)
}

/// Identifies one aggregation group in a report: a model crossed with an
/// optional operator and severity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    /// Model name.
    pub model: String,
    /// Operator restriction, or `None` for all operators.
    pub op_type: Option<OpType>,
    /// Severity restriction, or `None` for all severities.
    pub severity: Option<Severity>,
}

impl GroupKey {
    /// Whether a record belongs to this group.
    pub fn matches(&self, record: &RunRecord) -> bool {
        record.model == self.model
            && self.op_type.is_none_or(|op| record.op_type == op)
            && self.severity.is_none_or(|s| record.severity == s)
    }

    /// Canonical text form, used for seed derivation and sorting.
    pub fn canonical(&self) -> String {
        format!(
            "{}|{}|{}",
            self.model,
            self.op_type.map_or("*", |op| op.name()),
            self.severity.map_or("*", |s| s.label()),
        )
    }
}

/// Bootstrap settings for interval estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapParams {
    /// Number of bootstrap resamples.
    pub iterations: usize,
    /// Confidence level of the interval.
    pub level: f64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            iterations: 10_000,
            level: 0.95,
        }
    }
}

/// Aggregated stability metrics for one group of records.
///
/// Invariant: each interval brackets its point estimate
/// (`ci[0] <= point <= ci[1]`); the percentile interval is widened to the
/// point estimate in the rare resampling corner cases where it would not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Which records this group covers.
    pub group: GroupKey,
    /// Evaluated (ok) records in the group.
    pub records: usize,
    /// Skipped records in the group.
    pub skipped: usize,
    /// Failed records in the group.
    pub failed: usize,
    /// Top-1 flip rate.
    pub flip_rate: f64,
    /// Bootstrap interval for the flip rate.
    pub flip_rate_ci: [f64; 2],
    /// Mean top-5 Jaccard overlap.
    pub top5_overlap: f64,
    /// Fraction of cases with a consistent predicted label.
    pub prediction_consistency: f64,
    /// Flip rate on the label-consistent subset (`null` when that subset is
    /// empty).
    pub pred_consistent_flip_rate: Option<f64>,
    /// Bootstrap interval for the consistent-subset flip rate.
    pub pred_consistent_flip_rate_ci: Option<[f64; 2]>,
    /// Size of the label-consistent subset.
    pub pred_consistent_records: usize,
}

/// Compute the full metric block for one group of records.
///
/// `records` must already be filtered to the group. `seed` feeds the two
/// bootstrap runs (flip rate and consistent-subset flip rate) through
/// distinct derived seeds, so reports are deterministic for a given
/// configuration. Errors if the group has no evaluated records.
pub fn metric_report(
    group: GroupKey,
    records: &[RunRecord],
    bootstrap: &BootstrapParams,
    seed: u64,
) -> Result<MetricReport> {
    let skipped = records
        .iter()
        .filter(|r| matches!(r.status, RecordStatus::Skipped { .. }))
        .count();
    let failed = records
        .iter()
        .filter(|r| matches!(r.status, RecordStatus::Failed { .. }))
        .count();

    let point_flip_rate = flip_rate(records)?;
    let top5 = mean_topk_overlap(records, 5)?;
    let consistency = prediction_consistency(records)?;

    // Per-record (flip, label-consistent) pairs carry everything the
    // bootstraps need; resampling pairs is exactly resampling records.
    let pairs: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| {
            Ok((
                if flipped(r)? { 1.0 } else { 0.0 },
                prediction_consistent(r)?,
            ))
        })
        .collect::<Result<_>>()?;

    let flip_ci = if pairs.len() >= 2 {
        let (lo, hi) = paired_bootstrap_ci(
            &pairs,
            |sample| {
                let sum: f64 = sample.iter().map(|(flip, _)| *flip).sum();
                Some(sum / sample.len() as f64)
            },
            bootstrap.iterations,
            bootstrap.level,
            derive_seed(seed, &["flip_rate", &group.canonical()]),
        )?;
        [lo.min(point_flip_rate), hi.max(point_flip_rate)]
    } else {
        [point_flip_rate, point_flip_rate]
    };

    let (pcfr, pcfr_ci, pcfr_n) = match pred_consistent_flip_rate(records) {
        Ok((rate, n)) => {
            let ci = if pairs.len() >= 2 {
                let (lo, hi) = paired_bootstrap_ci(
                    &pairs,
                    |sample| {
                        let mut flips = 0.0;
                        let mut total = 0usize;
                        for (flip, consistent) in sample {
                            if *consistent {
                                flips += flip;
                                total += 1;
                            }
                        }
                        (total > 0).then(|| flips / total as f64)
                    },
                    bootstrap.iterations,
                    bootstrap.level,
                    derive_seed(seed, &["pred_consistent_flip_rate", &group.canonical()]),
                )?;
                [lo.min(rate), hi.max(rate)]
            } else {
                [rate, rate]
            };
            (Some(rate), Some(ci), n)
        }
        Err(Error::UndefinedMetric(_)) => (None, None, 0),
        Err(e) => return Err(e),
    };

    Ok(MetricReport {
        group,
        records: pairs.len(),
        skipped,
        failed,
        flip_rate: point_flip_rate,
        flip_rate_ci: flip_ci,
        top5_overlap: top5,
        prediction_consistency: consistency,
        pred_consistent_flip_rate: pcfr,
        pred_consistent_flip_rate_ci: pcfr_ci,
        pred_consistent_records: pcfr_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        case_id: &str,
        orig_label: &str,
        pert_label: &str,
        orig_top1: &str,
        pert_top1: &str,
    ) -> RunRecord {
        RunRecord {
            model: "m".into(),
            case_id: case_id.into(),
            op_type: OpType::WordDelete,
            severity: Severity::S10,
            status: RecordStatus::Ok,
            original_text: "some text".into(),
            perturbed_text: Some("some text".into()),
            original_pred: Some(LabelConfidence {
                label: orig_label.into(),
                confidence: 0.8,
            }),
            perturbed_pred: Some(LabelConfidence {
                label: pert_label.into(),
                confidence: 0.7,
            }),
            original_top1: Some(TopToken {
                index: 0,
                token: orig_top1.into(),
                score: 0.5,
            }),
            perturbed_top1: Some(TopToken {
                index: 1,
                token: pert_top1.into(),
                score: 0.4,
            }),
            original_topk_tokens: Some(vec![orig_top1.to_lowercase(), "filler".into()]),
            perturbed_topk_tokens: Some(vec![pert_top1.to_lowercase(), "filler".into()]),
            query_count: 10,
        }
    }

    fn skipped(case_id: &str) -> RunRecord {
        RunRecord {
            model: "m".into(),
            case_id: case_id.into(),
            op_type: OpType::BackTranslate,
            severity: Severity::S05,
            status: RecordStatus::Skipped {
                reason: "translator down".into(),
            },
            original_text: "some text".into(),
            perturbed_text: None,
            original_pred: None,
            perturbed_pred: None,
            original_top1: None,
            perturbed_top1: None,
            original_topk_tokens: None,
            perturbed_topk_tokens: None,
            query_count: 0,
        }
    }

    #[test]
    fn flip_compares_lowercased_strings_not_positions() {
        let same_word = record("c1", "pos", "pos", "Great", "great");
        assert!(!flipped(&same_word).unwrap());
        let moved = record("c2", "pos", "pos", "great", "awful");
        assert!(flipped(&moved).unwrap());
    }

    #[test]
    fn flip_rate_ignores_non_ok_records() {
        let records = vec![
            record("c1", "pos", "pos", "a", "a"),
            record("c2", "pos", "pos", "a", "b"),
            skipped("c3"),
        ];
        assert!((flip_rate(&records).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flip_rate_is_undefined_without_ok_records() {
        let records = vec![skipped("c1")];
        assert!(matches!(
            flip_rate(&records),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(flip_rate(&[]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn topk_overlap_is_jaccard_on_prefix_sets() {
        let mut r = record("c1", "pos", "pos", "a", "a");
        r.original_topk_tokens = Some(vec!["a".into(), "b".into(), "c".into()]);
        r.perturbed_topk_tokens = Some(vec!["b".into(), "a".into(), "d".into()]);
        // k=2: {a,b} vs {b,a} -> 1.0
        assert!((topk_overlap(&r, 2).unwrap() - 1.0).abs() < 1e-12);
        // k=3: {a,b,c} vs {a,b,d} -> 2/4
        assert!((topk_overlap(&r, 3).unwrap() - 0.5).abs() < 1e-12);
        // k beyond stored length: uses whole lists.
        assert!((topk_overlap(&r, 10).unwrap() - 0.5).abs() < 1e-12);
        assert!(topk_overlap(&r, 0).is_err());
    }

    #[test]
    fn topk_overlap_of_two_empty_sets_is_one() {
        let mut r = record("c1", "pos", "pos", "a", "a");
        r.original_topk_tokens = Some(vec![]);
        r.perturbed_topk_tokens = Some(vec![]);
        assert!((topk_overlap(&r, 5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_and_conditional_flip_rate() {
        let records = vec![
            record("c1", "pos", "pos", "a", "a"), // consistent, no flip
            record("c2", "pos", "pos", "a", "b"), // consistent, flip
            record("c3", "pos", "neg", "a", "b"), // inconsistent, flip
            record("c4", "pos", "neg", "a", "a"), // inconsistent, no flip
        ];
        assert!((prediction_consistency(&records).unwrap() - 0.5).abs() < 1e-12);
        let (rate, n) = pred_consistent_flip_rate(&records).unwrap();
        assert_eq!(n, 2);
        assert!((rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_flip_rate_undefined_on_empty_subset() {
        let records = vec![record("c1", "pos", "neg", "a", "b")];
        assert!(matches!(
            pred_consistent_flip_rate(&records),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn bootstrap_is_deterministic_and_ordered() {
        let items: Vec<f64> = (0..50).map(|i| f64::from(i % 3)).collect();
        let mean = |s: &[&f64]| Some(s.iter().copied().sum::<f64>() / s.len() as f64);
        let a = paired_bootstrap_ci(&items, mean, 2000, 0.95, 11).unwrap();
        let b = paired_bootstrap_ci(&items, mean, 2000, 0.95, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.0 <= a.1);
    }

    #[test]
    fn bootstrap_degenerate_data_gives_degenerate_interval() {
        let items = vec![0.25f64; 40];
        let mean = |s: &[&f64]| Some(s.iter().copied().sum::<f64>() / s.len() as f64);
        let (lo, hi) = paired_bootstrap_ci(&items, mean, 1000, 0.95, 5).unwrap();
        assert_eq!(lo, 0.25);
        assert_eq!(hi, 0.25);
    }

    #[test]
    fn bootstrap_rejects_tiny_inputs_and_bad_levels() {
        let mean = |s: &[&f64]| Some(s.iter().copied().sum::<f64>() / s.len() as f64);
        assert!(paired_bootstrap_ci(&[1.0], mean, 100, 0.95, 1).is_err());
        let items = vec![1.0, 2.0];
        assert!(paired_bootstrap_ci(&items, mean, 100, 1.0, 1).is_err());
        assert!(paired_bootstrap_ci(&items, mean, 0, 0.95, 1).is_err());
    }

    #[test]
    fn bootstrap_errors_when_statistic_never_defined() {
        let items = vec![1.0f64, 2.0, 3.0];
        let never = |_: &[&f64]| -> Option<f64> { None };
        assert!(matches!(
            paired_bootstrap_ci(&items, never, 50, 0.95, 1),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn nearest_rank_handles_lattice_points() {
        assert_eq!(nearest_rank(0.025, 10_000), 250);
        assert_eq!(nearest_rank(0.975, 10_000), 9750);
        assert_eq!(nearest_rank(0.025, 500), 13); // ceil(12.5)
        assert_eq!(nearest_rank(0.0001, 100), 1);
        assert_eq!(nearest_rank(0.9999, 100), 100);
        // The 0.95-level alpha computed in floating point must still land
        // on the lattice rank.
        let alpha = (1.0 - 0.95) / 2.0;
        assert_eq!(nearest_rank(alpha, 10_000), 250);
        assert_eq!(nearest_rank(1.0 - alpha, 10_000), 9750);
    }

    #[test]
    fn metric_report_brackets_points_and_counts_statuses() {
        let mut records = vec![
            record("c1", "pos", "pos", "a", "a"),
            record("c2", "pos", "pos", "a", "b"),
            record("c3", "pos", "neg", "a", "b"),
            skipped("c4"),
        ];
        records.push(RunRecord {
            status: RecordStatus::Failed {
                reason: "endpoint 500".into(),
            },
            ..skipped("c5")
        });
        let group = GroupKey {
            model: "m".into(),
            op_type: None,
            severity: None,
        };
        let report = metric_report(group, &records, &BootstrapParams::default(), 3).unwrap();
        assert_eq!(report.records, 3);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.failed, 1);
        assert!(report.flip_rate_ci[0] <= report.flip_rate);
        assert!(report.flip_rate <= report.flip_rate_ci[1]);
        assert_eq!(report.pred_consistent_records, 2);
        let pcfr = report.pred_consistent_flip_rate.unwrap();
        let ci = report.pred_consistent_flip_rate_ci.unwrap();
        assert!(ci[0] <= pcfr && pcfr <= ci[1]);
    }

    #[test]
    fn record_round_trips_with_exact_field_layout() {
        let r = record("c1", "pos", "neg", "Great", "awful");
        let json = serde_json::to_string(&r).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        // Field order is part of the persistence contract.
        let keys: Vec<&str> = [
            "model",
            "case_id",
            "op_type",
            "severity",
            "status",
            "original_text",
            "perturbed_text",
            "original_pred",
            "perturbed_pred",
            "original_top1",
            "perturbed_top1",
            "original_topk_tokens",
            "perturbed_topk_tokens",
            "query_count",
        ]
        .to_vec();
        let mut cursor = 0;
        for key in keys {
            let pos = json.find(&format!("\"{key}\":")).unwrap();
            assert!(pos >= cursor, "field {key} out of order");
            cursor = pos;
        }
        // Null fields stay present on skipped records.
        let s = serde_json::to_string(&skipped("c9")).unwrap();
        assert!(s.contains("\"perturbed_text\":null"));
        assert!(s.contains("\"original_pred\":null"));
    }

    #[test]
    fn group_key_matching_and_canonical_form() {
        let r = record("c1", "pos", "pos", "a", "a");
        let all = GroupKey {
            model: "m".into(),
            op_type: None,
            severity: None,
        };
        let op = GroupKey {
            model: "m".into(),
            op_type: Some(OpType::WordDelete),
            severity: None,
        };
        let cell = GroupKey {
            model: "m".into(),
            op_type: Some(OpType::WordDelete),
            severity: Some(Severity::S20),
        };
        assert!(all.matches(&r));
        assert!(op.matches(&r));
        assert!(!cell.matches(&r), "severity differs");
        assert_eq!(all.canonical(), "m|*|*");
        assert_eq!(cell.canonical(), "m|word_delete|0.20");
    }
}
