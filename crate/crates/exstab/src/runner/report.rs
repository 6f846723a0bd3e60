//! Report emission: a pure function of the run directory.
//!
//! `emit_report` reads the config echo, grid, and records, computes every
//! aggregate, and (re)writes `report.json` plus the `plotdata/` CSV tables.
//! Nothing here queries a model, reads the clock, or records a path, so
//! re-emitting a report from the same run directory is byte-identical —
//! including after a resume, and regardless of the concurrency the run used
//! (records are sorted before any aggregation).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::tokenize;
use crate::cost::{cost_profile, CostProfile};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, GroupKey, MetricReport, RecordStatus, RunRecord};
use crate::perturb::{CaseOutcome, GridCase, OpType, Severity};
use crate::seed::{derive_seed, stable_hash};

use super::config::RunConfig;
use super::execute::{
    load_grid, load_records, write_atomic, CASES_FILE, CONFIG_ECHO_FILE, DATASET_FILE,
    PLOTDATA_DIR, RECORDS_FILE, REPORT_FILE,
};

/// Ingestion counts persisted alongside the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    /// Dataset display name.
    pub name: String,
    /// Documents admitted by ingestion.
    pub ingested: usize,
    /// Documents dropped for empty/whitespace-only text.
    pub dropped_empty: usize,
    /// Documents in the evaluated sample.
    pub sampled: usize,
}

/// Grid-level statistics for one (operator, severity) cell, aggregated over
/// documents. Model-independent: the grid is shared by every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStat {
    pub op_type: OpType,
    pub severity: Severity,
    /// Grid cells at this (operator, severity).
    pub cases: usize,
    /// Cells that produced usable perturbed text.
    pub ready: usize,
    /// Cells skipped at grid-build time.
    pub skipped: usize,
    /// Sum of edit budgets over ready cells.
    pub budget_total: u64,
    /// Sum of edits actually applied over ready cells.
    pub applied_total: u64,
    /// Ready cells where fewer edits than budgeted were possible.
    pub shortfall_cases: usize,
    /// True when the severity levels replicate one transformation
    /// (round-trip translation) rather than scaling it.
    pub replicate: bool,
}

/// One skipped (model, case) record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub model: String,
    pub case_id: String,
    pub reason: String,
}

/// One failed (model, case) record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCase {
    pub model: String,
    pub case_id: String,
    pub reason: String,
}

/// Caveats a reader needs before comparing numbers across groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportNotes {
    /// Present when the grid contains round-trip translation cells.
    pub back_translate_replicates: Option<String>,
}

/// The aggregated report persisted as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Hash of the config echo this report was computed under.
    pub config_hash: String,
    pub dataset: DatasetSummary,
    /// Metric blocks: per model an overall group, one per operator, one per
    /// (operator, severity), and one per severity. Groups with zero
    /// evaluated records are omitted.
    pub groups: Vec<MetricReport>,
    /// Cost/tier summary per model (omitted for models with no evaluated
    /// records).
    pub cost_profiles: Vec<CostProfile>,
    /// Sum of logical query counts per model.
    pub query_totals: BTreeMap<String, u64>,
    /// Grid statistics per (operator, severity).
    pub perturbation_stats: Vec<PerturbationStat>,
    /// Every skipped (model, case) with its reason.
    pub skipped_cases: Vec<SkippedCase>,
    /// Every failed (model, case) with its reason.
    pub failed_cases: Vec<FailedCase>,
    pub notes: ReportNotes,
}

fn csv_to_string(rows: &[Vec<String>]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| Error::InvalidInput(format!("cannot encode CSV row: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("cannot finish CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("CSV is not UTF-8: {e}")))
}

fn fmt_f64(value: f64) -> String {
    // `{}` on f64 prints the shortest representation that round-trips,
    // which is deterministic across platforms.
    format!("{value}")
}

/// Compute a run's report from its directory and write `report.json` and
/// `plotdata/*.csv`. Returns the report.
///
/// This function is read-only with respect to evaluation state: it never
/// queries a model and fails (rather than repairs) on a corrupt
/// `records.jsonl` — resuming the run repairs a torn final line.
pub fn emit_report(run_dir: &Path) -> Result<RunReport> {
    let echo = std::fs::read_to_string(run_dir.join(CONFIG_ECHO_FILE)).map_err(|e| {
        Error::Config(format!(
            "run directory {} has no readable config echo: {e}",
            run_dir.display()
        ))
    })?;
    let config: RunConfig = serde_json::from_str(&echo)?;
    let config_hash = format!("{:016x}", stable_hash(&[echo.as_bytes()]));

    let dataset: DatasetSummary =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join(DATASET_FILE))?)?;
    let grid = load_grid(&run_dir.join(CASES_FILE))?;
    let mut records = load_records(&run_dir.join(RECORDS_FILE), false)?;

    // Canonical record order: aggregation (bootstrap resampling included)
    // must not depend on the order cases finished in.
    records.sort_by(|a, b| (&a.model, &a.case_id).cmp(&(&b.model, &b.case_id)));

    // Sanity: no duplicate evaluations, no records from outside this run.
    let known_models: HashSet<&str> = config.models.iter().map(|m| m.name.as_str()).collect();
    let known_cases: HashSet<&str> = grid.iter().map(|c| c.case_id.as_str()).collect();
    let mut seen: HashSet<(&str, &str)> = HashSet::with_capacity(records.len());
    for record in &records {
        if !known_models.contains(record.model.as_str()) {
            return Err(Error::InvalidInput(format!(
                "records.jsonl mentions model {:?}, which the run config does not",
                record.model
            )));
        }
        if !known_cases.contains(record.case_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "records.jsonl mentions case {:?}, which the grid does not",
                record.case_id
            )));
        }
        if !seen.insert((record.model.as_str(), record.case_id.as_str())) {
            return Err(Error::InvalidInput(format!(
                "records.jsonl contains case {} twice for model {}",
                record.case_id, record.model
            )));
        }
    }

    let report = compute_report(&config, config_hash, dataset, &grid, &records)?;

    let json = format!("{}\n", serde_json::to_string_pretty(&report)?);
    write_atomic(&run_dir.join(REPORT_FILE), &json)?;

    let plotdata = run_dir.join(PLOTDATA_DIR);
    std::fs::create_dir_all(&plotdata)?;
    for (name, content) in plotdata_tables(&report)? {
        write_atomic(&plotdata.join(name), &content)?;
    }
    Ok(report)
}

/// Pure aggregation over already-loaded run state.
fn compute_report(
    config: &RunConfig,
    config_hash: String,
    dataset: DatasetSummary,
    grid: &[GridCase],
    records: &[RunRecord],
) -> Result<RunReport> {
    let report_seed = derive_seed(config.global_seed, &["report"]);

    // Enumerate groups per model: overall, per operator, per (operator,
    // severity), per severity — in config order throughout.
    let mut groups: Vec<MetricReport> = Vec::new();
    let mut overall_by_model: BTreeMap<String, f64> = BTreeMap::new();
    for model in &config.models {
        let mut keys = vec![GroupKey {
            model: model.name.clone(),
            op_type: None,
            severity: None,
        }];
        for &op in &config.perturbations.operators {
            keys.push(GroupKey {
                model: model.name.clone(),
                op_type: Some(op),
                severity: None,
            });
        }
        for &op in &config.perturbations.operators {
            for &severity in &config.perturbations.severities {
                keys.push(GroupKey {
                    model: model.name.clone(),
                    op_type: Some(op),
                    severity: Some(severity),
                });
            }
        }
        for &severity in &config.perturbations.severities {
            keys.push(GroupKey {
                model: model.name.clone(),
                op_type: None,
                severity: Some(severity),
            });
        }
        for key in keys {
            let members: Vec<RunRecord> = records
                .iter()
                .filter(|r| key.matches(r))
                .cloned()
                .collect();
            match metric_report(key, &members, &config.bootstrap, report_seed) {
                Ok(block) => {
                    if block.group.op_type.is_none() && block.group.severity.is_none() {
                        overall_by_model.insert(block.group.model.clone(), block.flip_rate);
                    }
                    groups.push(block);
                }
                Err(Error::UndefinedMetric(_)) => {} // no evaluated records in this slice
                Err(e) => return Err(e),
            }
        }
    }

    // Cost profiles need the mean document length of the evaluated sample.
    let mut doc_words: BTreeMap<&str, usize> = BTreeMap::new();
    for case in grid {
        doc_words
            .entry(case.doc_id.as_str())
            .or_insert_with(|| tokenize(&case.original_text).len());
    }
    let mean_word_count = if doc_words.is_empty() {
        0.0
    } else {
        doc_words.values().sum::<usize>() as f64 / doc_words.len() as f64
    };
    let mut cost_profiles = Vec::new();
    for model in &config.models {
        if let Some(&flip_rate) = overall_by_model.get(&model.name) {
            cost_profiles.push(cost_profile(
                model.name.clone(),
                mean_word_count,
                model.per_call_cost,
                flip_rate,
                config.cost,
            )?);
        }
    }

    let mut query_totals: BTreeMap<String, u64> = BTreeMap::new();
    for record in records {
        *query_totals.entry(record.model.clone()).or_insert(0) += record.query_count;
    }

    // Grid statistics per (operator, severity), in config order.
    let mut perturbation_stats = Vec::new();
    for &op in &config.perturbations.operators {
        for &severity in &config.perturbations.severities {
            let mut stat = PerturbationStat {
                op_type: op,
                severity,
                cases: 0,
                ready: 0,
                skipped: 0,
                budget_total: 0,
                applied_total: 0,
                shortfall_cases: 0,
                replicate: op == OpType::BackTranslate,
            };
            for case in grid
                .iter()
                .filter(|c| c.op_type == op && c.severity == severity)
            {
                stat.cases += 1;
                match &case.outcome {
                    CaseOutcome::Ready {
                        budget, applied, ..
                    } => {
                        stat.ready += 1;
                        stat.budget_total += *budget as u64;
                        stat.applied_total += *applied as u64;
                        if applied < budget {
                            stat.shortfall_cases += 1;
                        }
                    }
                    CaseOutcome::Skipped { .. } => stat.skipped += 1,
                }
            }
            perturbation_stats.push(stat);
        }
    }

    let mut skipped_cases = Vec::new();
    let mut failed_cases = Vec::new();
    for record in records {
        match &record.status {
            RecordStatus::Skipped { reason } => skipped_cases.push(SkippedCase {
                model: record.model.clone(),
                case_id: record.case_id.clone(),
                reason: reason.clone(),
            }),
            RecordStatus::Failed { reason } => failed_cases.push(FailedCase {
                model: record.model.clone(),
                case_id: record.case_id.clone(),
                reason: reason.clone(),
            }),
            RecordStatus::Ok => {}
        }
    }

    let has_bt = grid.iter().any(|c| c.op_type == OpType::BackTranslate);
    let notes = ReportNotes {
        back_translate_replicates: has_bt.then(|| {
            "back_translate ignores severity: the three cells per document replicate one \
             full-text round trip (replicate = true), so severity-marginal aggregates mix \
             replicated measurements for that operator."
                .to_string()
        }),
    };

    Ok(RunReport {
        config_hash,
        dataset,
        groups,
        cost_profiles,
        query_totals,
        perturbation_stats,
        skipped_cases,
        failed_cases,
        notes,
    })
}

/// The `plotdata/` CSV tables for a report, as (file name, content) pairs.
fn plotdata_tables(report: &RunReport) -> Result<Vec<(&'static str, String)>> {
    let mut by_severity = vec![vec![
        "model".to_string(),
        "op_type".to_string(),
        "severity".to_string(),
        "flip_rate".to_string(),
        "ci_low".to_string(),
        "ci_high".to_string(),
        "records".to_string(),
    ]];
    let mut by_operator = vec![vec![
        "model".to_string(),
        "op_type".to_string(),
        "flip_rate".to_string(),
        "ci_low".to_string(),
        "ci_high".to_string(),
        "records".to_string(),
    ]];
    for group in &report.groups {
        match (group.group.op_type, group.group.severity) {
            (Some(op), Some(severity)) => by_severity.push(vec![
                group.group.model.clone(),
                op.name().to_string(),
                severity.label().to_string(),
                fmt_f64(group.flip_rate),
                fmt_f64(group.flip_rate_ci[0]),
                fmt_f64(group.flip_rate_ci[1]),
                group.records.to_string(),
            ]),
            (Some(op), None) => by_operator.push(vec![
                group.group.model.clone(),
                op.name().to_string(),
                fmt_f64(group.flip_rate),
                fmt_f64(group.flip_rate_ci[0]),
                fmt_f64(group.flip_rate_ci[1]),
                group.records.to_string(),
            ]),
            _ => {}
        }
    }

    let mut by_scale = vec![vec![
        "model".to_string(),
        "per_call_cost".to_string(),
        "cost_multiplier".to_string(),
        "flip_rate".to_string(),
        "ci_low".to_string(),
        "ci_high".to_string(),
        "tier".to_string(),
    ]];
    for profile in &report.cost_profiles {
        let overall = report.groups.iter().find(|g| {
            g.group.model == profile.model
                && g.group.op_type.is_none()
                && g.group.severity.is_none()
        });
        let (lo, hi) = overall
            .map(|g| (g.flip_rate_ci[0], g.flip_rate_ci[1]))
            .unwrap_or((profile.flip_rate, profile.flip_rate));
        by_scale.push(vec![
            profile.model.clone(),
            fmt_f64(profile.per_call_cost),
            fmt_f64(profile.cost_multiplier),
            fmt_f64(profile.flip_rate),
            fmt_f64(lo),
            fmt_f64(hi),
            profile.tier.name().to_string(),
        ]);
    }

    Ok(vec![
        ("fr_by_severity.csv", csv_to_string(&by_severity)?),
        ("fr_by_operator.csv", csv_to_string(&by_operator)?),
        ("fr_by_scale.csv", csv_to_string(&by_scale)?),
    ])
}
