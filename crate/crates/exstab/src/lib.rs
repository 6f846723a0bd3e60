//! Black-box evaluation of text-explanation stability under seeded input
//! perturbations.
//!
//! A classifier that answers "*why* did you predict that?" is only useful if
//! the answer survives harmless rephrasings of the input. This crate
//! measures that: it perturbs documents along a fixed operator × severity
//! grid, explains the model's prediction on both sides of every pair with a
//! model-agnostic explainer, and scores how often the explanation's most
//! important word changes (flip rate), how much the top-5 word sets overlap,
//! and whether the predicted label itself survived — with seeded bootstrap
//! confidence intervals, per-model query accounting, and a cost/deployment
//! tier assignment. Everything is deterministic given one global seed.
//!
//! # Start with the examples
//!
//! The `examples/` directory is the primary interface; each one is a
//! self-contained, runnable walkthrough of a single capability
//! (`cargo run --example <name>`):
//!
//! | Example | What it shows |
//! |---|---|
//! | `toy_pipeline` | End-to-end run against the builtin toy model: config → run directory → report |
//! | `loo_explain` | Leave-one-out occlusion explanations, verified against the toy model's closed form |
//! | `perturb_preview` | The perturbation grid: budgets, safeguards, and per-case seeds, no model needed |
//! | `surrogate_vs_loo` | Sampled linear surrogate explanations agreeing with occlusion on the top word |
//! | `bootstrap_ci` | Paired bootstrap confidence intervals for flip rates |
//! | `http_endpoints` | Wire protocols: classifier, completion scoring, and translation endpoints against a local mock server |
//! | `cost_tiers` | Explanation query costs and deployment tier assignment |
//!
//! A thin `exstab` binary wraps the same library surface for batch use:
//! `exstab run <config.toml>`, `exstab report <run-dir>`,
//! `exstab perturb <config.toml> --preview`, `exstab validate <config.toml>`.
//!
//! # Library layout
//!
//! * [`core`] — tokenization, label sets, documents, predictions, ranked
//!   explanations.
//! * [`seed`] — stable hashing and seed derivation; all randomness flows
//!   from here.
//! * [`perturb`] — the six perturbation operators, severity budgets, the
//!   synonym lexicon, translation clients, and the evaluation grid.
//! * [`explain`] — leave-one-out occlusion and the sampled linear
//!   surrogate.
//! * [`metrics`] — flip rate, top-k overlap, prediction consistency, and
//!   the paired bootstrap.
//! * [`cost`] — query-cost multipliers and deployment tiers.
//! * [`modelclient`] — the [`TextClassifier`](modelclient::TextClassifier)
//!   trait, the builtin toy model, HTTP clients, and the query cache.
//! * [`runner`] — config files, dataset ingestion, run directories,
//!   resumable execution, and report emission.
//! * [`mockserver`] — an in-process HTTP server implementing all three wire
//!   protocols for tests and examples.
//! * [`http`] — shared retrying JSON POST transport.
//!
//! # Determinism contract
//!
//! Given the same config (seed included), dataset, and model behavior, a
//! run produces the same grid, the same records, and a byte-identical
//! report — across platforms, process restarts, and resume boundaries.
//! Randomness comes exclusively from a small, explicitly seeded PRNG per
//! decision site; nothing reads OS entropy, the clock, or iteration order
//! of unordered containers.

pub mod core;
pub mod cost;
pub mod error;
pub mod explain;
pub mod http;
pub mod metrics;
pub mod mockserver;
pub mod modelclient;
pub mod perturb;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
