//! Dataset ingestion and deterministic subsampling.
//!
//! Two input formats are supported:
//!
//! * **JSONL** — one JSON object per line with a required `"text"` string
//!   and an optional `"id"` string. Records without an id get a zero-padded
//!   record index (`"000000"`, `"000001"`, ...). Other keys (labels,
//!   metadata) are ignored; this pipeline never consumes gold labels.
//! * **CSV** — a header row followed by two columns `(text, label)`. The
//!   label column is parsed and discarded, ids are generated from the row
//!   index.
//!
//! Documents whose text is empty or whitespace-only are dropped and
//! counted, not errored; anything structurally wrong (unparseable line,
//! wrong column count, duplicate id) is an error naming the offending line.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::core::Document;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use rand::Rng;

use super::{DatasetConfig, DatasetFormat};

/// An ingested corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Display name (configured, or the file stem).
    pub name: String,
    /// Admitted documents, in file order.
    pub documents: Vec<Document>,
    /// Documents dropped for empty/whitespace-only text.
    pub dropped_empty: usize,
}

#[derive(Deserialize)]
struct JsonlRow {
    #[serde(default)]
    id: Option<String>,
    text: String,
}

fn dataset_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn admit(
    documents: &mut Vec<Document>,
    seen_ids: &mut HashSet<String>,
    dropped: &mut usize,
    path: &Path,
    line: usize,
    id: String,
    text: String,
) -> Result<()> {
    if !seen_ids.insert(id.clone()) {
        return Err(dataset_error(path, line, format!("duplicate document id {id:?}")));
    }
    match Document::new(id, text) {
        Ok(doc) => documents.push(doc),
        Err(Error::InvalidInput(_)) => *dropped += 1,
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Ingest a JSONL file. Blank lines are skipped; generated ids number the
/// parsed records from zero.
pub fn ingest_jsonl(path: &Path) -> Result<(Vec<Document>, usize)> {
    let content = std::fs::read_to_string(path)?;
    let mut documents = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut dropped = 0usize;
    let mut record_index = 0usize;
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(line).map_err(|e| {
            dataset_error(path, lineno + 1, format!("unparseable JSON: {e}"))
        })?;
        let id = row.id.unwrap_or_else(|| format!("{record_index:06}"));
        record_index += 1;
        admit(
            &mut documents,
            &mut seen_ids,
            &mut dropped,
            path,
            lineno + 1,
            id,
            row.text,
        )?;
    }
    Ok((documents, dropped))
}

/// Ingest a two-column `(text, label)` CSV with a header row. The label is
/// discarded.
pub fn ingest_csv(path: &Path) -> Result<(Vec<Document>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| dataset_error(path, 1, format!("cannot open CSV: {e}")))?;
    let mut documents = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut dropped = 0usize;
    for (record_index, row) in reader.records().enumerate() {
        // Header is line 1; data row i is physical line i + 2.
        let lineno = record_index + 2;
        let row = row.map_err(|e| dataset_error(path, lineno, format!("bad CSV row: {e}")))?;
        if row.len() != 2 {
            return Err(dataset_error(
                path,
                lineno,
                format!("expected 2 columns (text, label), found {}", row.len()),
            ));
        }
        let text = row.get(0).unwrap_or("").to_string();
        admit(
            &mut documents,
            &mut seen_ids,
            &mut dropped,
            path,
            lineno,
            format!("{record_index:06}"),
            text,
        )?;
    }
    Ok((documents, dropped))
}

/// Ingest the dataset a config points at.
pub fn ingest_dataset(config: &DatasetConfig) -> Result<Dataset> {
    let (documents, dropped_empty) = match config.format {
        DatasetFormat::Jsonl => ingest_jsonl(&config.path)?,
        DatasetFormat::Csv => ingest_csv(&config.path)?,
    };
    Ok(Dataset {
        name: config.resolved_name(),
        documents,
        dropped_empty,
    })
}

/// Deterministically subsample `sample_size` documents.
///
/// When the corpus is no larger than the target, all documents are kept.
/// Otherwise a seeded draw without replacement selects the subsample, and
/// the selected documents keep their corpus order.
pub fn sample_documents(
    documents: Vec<Document>,
    sample_size: usize,
    global_seed: u64,
) -> Vec<Document> {
    if documents.len() <= sample_size {
        return documents;
    }
    let n = documents.len();
    let mut rng = rng_from_seed(derive_seed(global_seed, &["sample"]));
    let mut indices: Vec<usize> = (0..n).collect();
    for j in 0..sample_size {
        let k = rng.random_range(j..n);
        indices.swap(j, k);
    }
    let mut keep: Vec<usize> = indices[..sample_size].to_vec();
    keep.sort_unstable();
    let keep_set: HashSet<usize> = keep.iter().copied().collect();
    documents
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep_set.contains(i))
        .map(|(_, d)| d)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_generates_zero_padded_ids() {
        let f = write_temp(
            "{\"text\": \"first doc\"}\n{\"id\": \"named\", \"text\": \"second doc\"}\n{\"text\": \"third doc\"}\n",
            ".jsonl",
        );
        let (docs, dropped) = ingest_jsonl(f.path()).unwrap();
        assert_eq!(dropped, 0);
        let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["000000", "named", "000002"]);
    }

    #[test]
    fn jsonl_drops_empty_text_and_counts_it() {
        let f = write_temp(
            "{\"text\": \"kept\"}\n{\"text\": \"   \"}\n{\"text\": \"\"}\n{\"text\": \"also kept\"}\n",
            ".jsonl",
        );
        let (docs, dropped) = ingest_jsonl(f.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(dropped, 2);
    }

    #[test]
    fn jsonl_rejects_duplicates_and_garbage_with_line_numbers() {
        let f = write_temp("{\"id\": \"x\", \"text\": \"a\"}\n{\"id\": \"x\", \"text\": \"b\"}\n", ".jsonl");
        let err = ingest_jsonl(f.path()).unwrap_err();
        assert!(matches!(err, Error::Dataset { line: 2, .. }), "{err}");

        let f = write_temp("{\"text\": \"fine\"}\nnot json at all\n", ".jsonl");
        let err = ingest_jsonl(f.path()).unwrap_err();
        assert!(matches!(err, Error::Dataset { line: 2, .. }), "{err}");

        // Generated ids number every record, so an explicit id that matches
        // another record's position collides with its generated id.
        let f = write_temp("{\"text\": \"a\"}\n{\"id\": \"000000\", \"text\": \"b\"}\n", ".jsonl");
        assert!(ingest_jsonl(f.path()).is_err());
        let f = write_temp("{\"id\": \"000001\", \"text\": \"a\"}\n{\"text\": \"b\"}\n", ".jsonl");
        assert!(ingest_jsonl(f.path()).is_err());
    }

    #[test]
    fn jsonl_skips_blank_lines_without_numbering_them() {
        let f = write_temp("{\"text\": \"a\"}\n\n{\"text\": \"b\"}\n", ".jsonl");
        let (docs, _) = ingest_jsonl(f.path()).unwrap();
        assert_eq!(docs[1].id, "000001");
    }

    #[test]
    fn csv_parses_two_columns_with_header() {
        let f = write_temp("text,label\ngreat movie,pos\nterrible plot,neg\n", ".csv");
        let (docs, dropped) = ingest_csv(f.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(dropped, 0);
        assert_eq!(docs[0].id, "000000");
        assert_eq!(docs[0].text, "great movie");
    }

    #[test]
    fn csv_rejects_wrong_column_counts() {
        let f = write_temp("text,label\nonly one column\n", ".csv");
        let err = ingest_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::Dataset { line: 2, .. }), "{err}");
    }

    #[test]
    fn csv_drops_empty_text() {
        let f = write_temp("text,label\n,pos\ngood,neg\n", ".csv");
        let (docs, dropped) = ingest_csv(f.path()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn sampling_is_deterministic_and_order_preserving() {
        let docs: Vec<Document> = (0..100)
            .map(|i| Document::new(format!("{i:06}"), format!("doc number {i}")).unwrap())
            .collect();
        let a = sample_documents(docs.clone(), 10, 42);
        let b = sample_documents(docs.clone(), 10, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        // Corpus order is preserved within the sample.
        let positions: Vec<usize> = a
            .iter()
            .map(|d| docs.iter().position(|x| x.id == d.id).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        // A different seed draws a different sample.
        let c = sample_documents(docs.clone(), 10, 43);
        assert_ne!(a, c);
        // Small corpora pass through untouched.
        let d = sample_documents(docs.clone(), 1000, 42);
        assert_eq!(d.len(), 100);
    }
}
