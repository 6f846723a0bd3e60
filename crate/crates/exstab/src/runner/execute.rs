//! Run execution: build (or reload) the perturbation grid, evaluate every
//! (model, case) pair, and persist records incrementally so an interrupted
//! run resumes without repeating work.
//!
//! # Determinism and resumability
//!
//! * The grid is built once and persisted to `cases.jsonl`; resumed runs
//!   reload it instead of recomputing, so pairings (including round-trip
//!   translations) are frozen at first contact.
//! * `query_count` is a *logical* count: for each model, cases are walked in
//!   canonical order (config model order × grid order) and each case is
//!   charged for the query strings no earlier case of that model already
//!   needed. The count is a pure function of the grid and config — actual
//!   evaluation order, caching, failures, and resume boundaries cannot
//!   change it.
//! * Records append to `records.jsonl` with a flush per line. A record
//!   whose (model, case) pair is already present is never re-evaluated.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::core::Document;
use crate::error::{Error, Result};
use crate::explain::{
    explain_loo, explain_surrogate, loo_query_texts, surrogate_query_texts, ExplainerMethod,
    SurrogateParams,
};
use crate::metrics::{LabelConfidence, RecordStatus, RunRecord, TopToken};
use crate::modelclient::{CachedClassifier, TextClassifier};
use crate::perturb::{build_perturbation_grid, CaseOutcome, GridCase, GridPlan, SynonymLexicon};
use crate::seed::{derive_seed, stable_hash};

use super::config::RunConfig;
use super::dataset::{ingest_dataset, sample_documents};
use super::report::{emit_report, DatasetSummary};

/// File names inside a run directory.
pub(super) const CONFIG_ECHO_FILE: &str = "config_echo.json";
pub(super) const DATASET_FILE: &str = "dataset.json";
pub(super) const CASES_FILE: &str = "cases.jsonl";
pub(super) const RECORDS_FILE: &str = "records.jsonl";
pub(super) const REPORT_FILE: &str = "report.json";
pub(super) const PLOTDATA_DIR: &str = "plotdata";

/// What a finished [`execute_run`] did.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// The run directory.
    pub run_dir: PathBuf,
    /// Models evaluated.
    pub models: usize,
    /// Grid cells (documents × operators × severities).
    pub grid_cases: usize,
    /// Records found already evaluated when the run started.
    pub resumed_records: usize,
    /// Records evaluated in this invocation.
    pub new_records: usize,
    /// Total ok records now in the run directory.
    pub ok_records: usize,
    /// Total skipped records now in the run directory.
    pub skipped_records: usize,
    /// Total failed records now in the run directory.
    pub failed_records: usize,
    /// Sum of logical query counts over all records.
    pub logical_queries: u64,
    /// Model queries actually sent in this invocation (cache misses).
    pub api_calls: u64,
    /// Surrogate fits that needed the ridge fallback in this invocation.
    pub ridge_fallbacks: u64,
}

/// Seed for the surrogate explanation of an *original* document.
///
/// Derived from (model, doc) only, so all grid cells of one document share
/// the original-side masks and the query cache collapses them.
pub fn original_surrogate_seed(global_seed: u64, model_name: &str, doc_id: &str) -> u64 {
    derive_seed(global_seed, &["surrogate", model_name, doc_id])
}

/// Seed for the surrogate explanation of a *perturbed* document, derived
/// from the case seed (which already encodes document, operator, and
/// severity) plus the model.
pub fn perturbed_surrogate_seed(case_seed: u64, model_name: &str) -> u64 {
    derive_seed(case_seed, &["surrogate", model_name])
}

/// Every query text one case evaluation needs for one model, in evaluation
/// order. Empty for skipped cases.
fn case_query_texts(
    case: &GridCase,
    model_name: &str,
    method: ExplainerMethod,
    params: &SurrogateParams,
    global_seed: u64,
) -> Result<Vec<String>> {
    let Some(paired) = case.paired()? else {
        return Ok(Vec::new());
    };
    match method {
        ExplainerMethod::Loo => {
            let mut texts = loo_query_texts(&paired.original);
            texts.extend(loo_query_texts(&paired.perturbed));
            Ok(texts)
        }
        ExplainerMethod::Surrogate => {
            let mut texts = surrogate_query_texts(
                &paired.original,
                params,
                original_surrogate_seed(global_seed, model_name, &paired.original.id),
            )?;
            texts.extend(surrogate_query_texts(
                &paired.perturbed,
                params,
                perturbed_surrogate_seed(case.seed, model_name),
            )?);
            Ok(texts)
        }
    }
}

/// Logical query counts for one model over the whole grid, in grid order.
///
/// Walks cases in canonical order and charges each case for the query
/// strings no earlier case needed. Cases that cannot be evaluated at all
/// (skipped, or explanation parameters that reject the document) count
/// zero.
fn logical_query_counts(
    grid: &[GridCase],
    model_name: &str,
    method: ExplainerMethod,
    params: &SurrogateParams,
    global_seed: u64,
) -> Vec<u64> {
    let mut seen: HashSet<u64> = HashSet::new();
    let mut counts = Vec::with_capacity(grid.len());
    for case in grid {
        let texts =
            case_query_texts(case, model_name, method, params, global_seed).unwrap_or_default();
        let mut fresh = 0u64;
        for text in &texts {
            if seen.insert(stable_hash(&[text.as_bytes()])) {
                fresh += 1;
            }
        }
        counts.push(fresh);
    }
    counts
}

fn identity_record(model_name: &str, case: &GridCase, status: RecordStatus, query_count: u64) -> RunRecord {
    RunRecord {
        model: model_name.to_string(),
        case_id: case.case_id.clone(),
        op_type: case.op_type,
        severity: case.severity,
        status,
        original_text: case.original_text.clone(),
        perturbed_text: match &case.outcome {
            CaseOutcome::Ready { perturbed_text, .. } => Some(perturbed_text.clone()),
            CaseOutcome::Skipped { .. } => None,
        },
        original_pred: None,
        perturbed_pred: None,
        original_top1: None,
        perturbed_top1: None,
        original_topk_tokens: None,
        perturbed_topk_tokens: None,
        query_count,
    }
}

fn evaluate_ready(
    model: &dyn TextClassifier,
    model_name: &str,
    case: &GridCase,
    method: ExplainerMethod,
    params: &SurrogateParams,
    global_seed: u64,
    query_count: u64,
) -> Result<(RunRecord, bool)> {
    let paired = case.paired()?.ok_or_else(|| {
        Error::InvalidInput(format!("case {} is not ready", case.case_id))
    })?;
    let original = &paired.original;
    let perturbed = &paired.perturbed;

    let original_pred = model.predict(&original.text)?;
    let perturbed_pred = model.predict(&perturbed.text)?;

    let mut ridge = false;
    let (original_expl, perturbed_expl) = match method {
        ExplainerMethod::Loo => (
            explain_loo(model, original)?,
            explain_loo(model, perturbed)?,
        ),
        ExplainerMethod::Surrogate => {
            let orig = explain_surrogate(
                model,
                original,
                params,
                original_surrogate_seed(global_seed, model_name, &original.id),
            )?;
            let pert = explain_surrogate(
                model,
                perturbed,
                params,
                perturbed_surrogate_seed(case.seed, model_name),
            )?;
            ridge = orig.ridge_fallback || pert.ridge_fallback;
            (orig.explanation, pert.explanation)
        }
    };

    let labels = model.label_set();
    let top_token = |expl: &crate::core::Explanation, doc: &Document| {
        let (index, score) = expl.top1();
        TopToken {
            index,
            token: doc.words[index].clone(),
            score,
        }
    };
    let label_conf = |pred: &crate::core::Prediction| LabelConfidence {
        label: labels.label(pred.predicted_index).to_string(),
        confidence: pred.confidence(),
    };

    let record = RunRecord {
        model: model_name.to_string(),
        case_id: case.case_id.clone(),
        op_type: case.op_type,
        severity: case.severity,
        status: RecordStatus::Ok,
        original_text: original.text.clone(),
        perturbed_text: Some(perturbed.text.clone()),
        original_pred: Some(label_conf(&original_pred)),
        perturbed_pred: Some(label_conf(&perturbed_pred)),
        original_top1: Some(top_token(&original_expl, original)),
        perturbed_top1: Some(top_token(&perturbed_expl, perturbed)),
        original_topk_tokens: Some(original_expl.topk_ranked_tokens(5, &original.words)?),
        perturbed_topk_tokens: Some(perturbed_expl.topk_ranked_tokens(5, &perturbed.words)?),
        query_count,
    };
    Ok((record, ridge))
}

/// Evaluate one (model, case) pair. Infallible: evaluation errors become a
/// `Failed` record carrying the error text. The boolean reports a surrogate
/// ridge fallback.
fn evaluate_case(
    model: &dyn TextClassifier,
    model_name: &str,
    case: &GridCase,
    method: ExplainerMethod,
    params: &SurrogateParams,
    global_seed: u64,
    query_count: u64,
) -> (RunRecord, bool) {
    match &case.outcome {
        CaseOutcome::Skipped { reason } => (
            identity_record(
                model_name,
                case,
                RecordStatus::Skipped {
                    reason: reason.clone(),
                },
                0,
            ),
            false,
        ),
        CaseOutcome::Ready { .. } => {
            match evaluate_ready(model, model_name, case, method, params, global_seed, query_count)
            {
                Ok(out) => out,
                Err(e) => (
                    identity_record(
                        model_name,
                        case,
                        RecordStatus::Failed {
                            reason: e.to_string(),
                        },
                        query_count,
                    ),
                    false,
                ),
            }
        }
    }
}

/// Write `content` to `path` through a temp file and rename, so readers
/// never observe a half-written file.
pub(super) fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn grid_to_jsonl(grid: &[GridCase]) -> Result<String> {
    let mut out = String::new();
    for case in grid {
        out.push_str(&serde_json::to_string(case)?);
        out.push('\n');
    }
    Ok(out)
}

pub(super) fn load_grid(path: &Path) -> Result<Vec<GridCase>> {
    let content = std::fs::read_to_string(path)?;
    let mut grid = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: GridCase = serde_json::from_str(line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: format!("unparseable grid case: {e}"),
        })?;
        grid.push(case);
    }
    Ok(grid)
}

/// Load prior records. A truncated *final* line (interrupted write) is
/// dropped and the file is repaired; corruption anywhere else is an error.
pub(super) fn load_records(path: &Path, repair: bool) -> Result<Vec<RunRecord>> {
    let content = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = content.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    for (lineno, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(record) => records.push(record),
            Err(_) if repair && lineno + 1 == lines.len() => {
                // Interrupted mid-write: keep everything before the partial
                // line and truncate it away.
                let kept: String = lines[..lineno]
                    .iter()
                    .map(|l| format!("{l}\n"))
                    .collect();
                std::fs::write(path, kept)?;
                break;
            }
            Err(e) => {
                return Err(Error::Dataset {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("unparseable record: {e}"),
                });
            }
        }
    }
    Ok(records)
}

/// Build the perturbation grid a config describes, without touching any
/// model endpoint or run directory. Used by `run` on first contact and by
/// grid previews.
pub fn preview_grid(config: &RunConfig) -> Result<(Vec<Document>, Vec<GridCase>, DatasetSummary)> {
    config.validate()?;
    let dataset = ingest_dataset(&config.dataset)?;
    let ingested = dataset.documents.len();
    if ingested == 0 {
        return Err(Error::Config(format!(
            "dataset {} contains no usable documents",
            dataset.name
        )));
    }
    let documents = sample_documents(dataset.documents, config.sample_size, config.global_seed);
    let lexicon = match &config.perturbations.lexicon {
        Some(path) => SynonymLexicon::load(path)?,
        None => SynonymLexicon::bundled_test(),
    };
    let mt = config.translation.build_client(config.retry.policy())?;
    let plan = GridPlan {
        operators: &config.perturbations.operators,
        severities: &config.perturbations.severities,
        lexicon: &lexicon,
        mt: mt.as_ref(),
        source_lang: &config.translation.source_lang,
        pivot_lang: &config.translation.pivot_lang,
        global_seed: config.global_seed,
    };
    let grid = build_perturbation_grid(&documents, &plan);
    let summary = DatasetSummary {
        name: dataset.name,
        ingested,
        dropped_empty: dataset.dropped_empty,
        sampled: documents.len(),
    };
    Ok((documents, grid, summary))
}

/// Execute (or resume) the run a config describes and emit its report.
pub fn execute_run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let run_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("output_dir is required to execute a run".into()))?;
    std::fs::create_dir_all(&run_dir)?;

    // Config echo: first contact writes it; later contacts must match it
    // exactly, so one run directory can never mix configurations.
    let echo = config.echo_json()?;
    let echo_path = run_dir.join(CONFIG_ECHO_FILE);
    if echo_path.exists() {
        let existing = std::fs::read_to_string(&echo_path)?;
        if existing != echo {
            return Err(Error::Config(format!(
                "run directory {} was created by a different configuration; \
                 use a fresh output_dir or restore the original config",
                run_dir.display()
            )));
        }
    } else {
        write_atomic(&echo_path, &echo)?;
    }

    // Grid: reload if persisted, otherwise build once and persist.
    let cases_path = run_dir.join(CASES_FILE);
    let records_path = run_dir.join(RECORDS_FILE);
    let grid = if cases_path.exists() {
        load_grid(&cases_path)?
    } else {
        if records_path.exists() {
            return Err(Error::Config(format!(
                "run directory {} has records but no grid; it is corrupt",
                run_dir.display()
            )));
        }
        let (_, grid, dataset_summary) = preview_grid(config)?;
        write_atomic(
            &run_dir.join(DATASET_FILE),
            &format!("{}\n", serde_json::to_string_pretty(&dataset_summary)?),
        )?;
        write_atomic(&cases_path, &grid_to_jsonl(&grid)?)?;
        grid
    };

    // Prior records (resume).
    let prior = if records_path.exists() {
        load_records(&records_path, true)?
    } else {
        Vec::new()
    };
    let mut done: HashSet<(String, String)> = HashSet::with_capacity(prior.len());
    let mut ok_total = 0usize;
    let mut skipped_total = 0usize;
    let mut failed_total = 0usize;
    let mut logical_queries = 0u64;
    for record in &prior {
        match record.status {
            RecordStatus::Ok => ok_total += 1,
            RecordStatus::Skipped { .. } => skipped_total += 1,
            RecordStatus::Failed { .. } => failed_total += 1,
        }
        logical_queries += record.query_count;
        if !done.insert((record.model.clone(), record.case_id.clone())) {
            return Err(Error::InvalidInput(format!(
                "records.jsonl contains case {} twice for model {}",
                record.case_id, record.model
            )));
        }
    }

    // Clients and logical query counts, one per model in config order.
    let method = config.explainer.method;
    let params = config.explainer.surrogate;
    let mut clients: Vec<CachedClassifier<Box<dyn TextClassifier>>> = Vec::new();
    let mut counts: Vec<Vec<u64>> = Vec::new();
    for model_config in &config.models {
        clients.push(CachedClassifier::new(
            model_config.build_client(config.retry.policy())?,
        ));
        counts.push(logical_query_counts(
            &grid,
            &model_config.name,
            method,
            &params,
            config.global_seed,
        ));
    }

    // Pending (model, case) pairs in canonical order: config model order,
    // then grid order.
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for (model_idx, model_config) in config.models.iter().enumerate() {
        for (case_idx, case) in grid.iter().enumerate() {
            if !done.contains(&(model_config.name.clone(), case.case_id.clone())) {
                pending.push((model_idx, case_idx));
            }
        }
    }

    let writer = Mutex::new(BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&records_path)?,
    ));
    let cursor = AtomicUsize::new(0);
    let abort: Mutex<Option<Error>> = Mutex::new(None);
    let ok_new = AtomicU64::new(0);
    let skipped_new = AtomicU64::new(0);
    let failed_new = AtomicU64::new(0);
    let queries_new = AtomicU64::new(0);
    let ridge_new = AtomicU64::new(0);

    let threads = config.concurrency.min(pending.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                if abort.lock().expect("abort lock").is_some() {
                    break;
                }
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= pending.len() {
                    break;
                }
                let (model_idx, case_idx) = pending[i];
                let model_config = &config.models[model_idx];
                let case = &grid[case_idx];
                let query_count = counts[model_idx][case_idx];
                let (record, ridge) = evaluate_case(
                    &clients[model_idx],
                    &model_config.name,
                    case,
                    method,
                    &params,
                    config.global_seed,
                    query_count,
                );
                match record.status {
                    RecordStatus::Ok => ok_new.fetch_add(1, Ordering::Relaxed),
                    RecordStatus::Skipped { .. } => skipped_new.fetch_add(1, Ordering::Relaxed),
                    RecordStatus::Failed { .. } => failed_new.fetch_add(1, Ordering::Relaxed),
                };
                queries_new.fetch_add(record.query_count, Ordering::Relaxed);
                if ridge {
                    ridge_new.fetch_add(1, Ordering::Relaxed);
                }
                let write_result = (|| -> Result<()> {
                    let line = serde_json::to_string(&record)?;
                    let mut guard = writer.lock().expect("writer lock");
                    writeln!(guard, "{line}")?;
                    guard.flush()?;
                    Ok(())
                })();
                if let Err(e) = write_result {
                    *abort.lock().expect("abort lock") = Some(e);
                    break;
                }
            });
        }
    });
    if let Some(e) = abort.into_inner().expect("abort lock") {
        return Err(e);
    }

    let api_calls: u64 = clients.iter().map(|c| c.stats().misses).sum();

    emit_report(&run_dir)?;

    Ok(RunSummary {
        run_dir,
        models: config.models.len(),
        grid_cases: grid.len(),
        resumed_records: prior.len(),
        new_records: pending.len(),
        ok_records: ok_total + ok_new.load(Ordering::Relaxed) as usize,
        skipped_records: skipped_total + skipped_new.load(Ordering::Relaxed) as usize,
        failed_records: failed_total + failed_new.load(Ordering::Relaxed) as usize,
        logical_queries: logical_queries + queries_new.load(Ordering::Relaxed),
        api_calls,
        ridge_fallbacks: ridge_new.load(Ordering::Relaxed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_seeds_are_stable_and_distinct_per_side() {
        let orig = original_surrogate_seed(7, "toy", "000001");
        assert_eq!(orig, original_surrogate_seed(7, "toy", "000001"));
        assert_ne!(orig, original_surrogate_seed(7, "toy", "000002"));
        assert_ne!(orig, original_surrogate_seed(7, "other", "000001"));
        let pert = perturbed_surrogate_seed(orig, "toy");
        assert_ne!(pert, orig);
    }

    #[test]
    fn truncated_final_record_line_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "{\"broken\": tru").unwrap();
        let records = load_records(&path, true).unwrap();
        assert!(records.is_empty());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
    }

    #[test]
    fn corrupt_interior_record_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "garbage\n{\"also\": \"garbage\"}\n").unwrap();
        let err = load_records(&path, true).unwrap_err();
        assert!(matches!(err, Error::Dataset { line: 1, .. }), "{err}");
    }
}
