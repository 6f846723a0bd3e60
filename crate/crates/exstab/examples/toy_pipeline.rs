//! End-to-end pipeline against the builtin toy model: write a config and a
//! tiny dataset, execute the run, and read the report back — no network, no
//! external services, fully deterministic.
//!
//! ```text
//! cargo run --example toy_pipeline
//! ```
//!
//! The run directory layout this produces is the same one the `exstab`
//! binary produces: `config_echo.json`, `dataset.json`, `cases.jsonl`,
//! `records.jsonl`, `report.json`, and `plotdata/*.csv`. Running the same
//! config against the same directory a second time resumes: everything is
//! already evaluated, so zero queries are sent and the report is re-emitted
//! byte-identically.

use exstab::runner::{execute_run, RunConfig};

fn main() -> exstab::Result<()> {
    let dir = tempfile::tempdir()?;

    // A small sentiment corpus. Ids are generated from record positions.
    let dataset_path = dir.path().join("reviews.jsonl");
    std::fs::write(
        &dataset_path,
        concat!(
            "{\"text\": \"the film was surprisingly good and the acting felt honest throughout\"}\n",
            "{\"text\": \"a bad script and worse pacing ruin what could have been a great movie\"}\n",
            "{\"text\": \"i loved the soundtrack but the plot was thin and the ending fell flat\"}\n",
            "{\"text\": \"brilliant direction and a strong cast make this one of the best films this year\"}\n",
            "{\"text\": \"boring dialogue terrible effects and a confusing story make it hard to recommend\"}\n",
            "{\"text\": \"an honest small movie with good humor and a warm heart that stays with you\"}\n",
        ),
    )?;

    // The same TOML a user would feed `exstab run`. The toy model is a
    // signed word lexicon: positive weights pull toward the first label.
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        format!(
            r#"
global_seed = 42
sample_size = 6
output_dir = "eval-run"

[dataset]
path = {dataset:?}
format = "jsonl"

[bootstrap]
iterations = 2000
level = 0.95

[translation]
kind = "dictionary"
pairs = {{ film = "kinofilm", movie = "kinofilm", good = "gut", bad = "schlecht" }}

[[models]]
name = "toy-sentiment"
kind = "builtin_toy"
labels = ["positive", "negative"]
per_call_cost = 1.0

[models.lexicon]
good = 1.2
great = 1.5
brilliant = 1.4
loved = 1.1
best = 1.3
honest = 0.6
warm = 0.5
bad = -1.2
worse = -1.1
terrible = -1.4
boring = -1.0
ruin = -0.9
thin = -0.5
flat = -0.6
confusing = -0.8
"#,
            dataset = dataset_path.display().to_string(),
        ),
    )?;

    let config = RunConfig::load(&config_path)?;
    println!("executing: 6 docs x 6 operators x 3 severities = 108 cases\n");
    let summary = execute_run(&config)?;
    println!(
        "first run : {} ok / {} skipped / {} failed, {} logical queries, {} sent",
        summary.ok_records,
        summary.skipped_records,
        summary.failed_records,
        summary.logical_queries,
        summary.api_calls
    );

    // Same config, same directory: nothing left to evaluate.
    let summary = execute_run(&config)?;
    println!(
        "resumed   : {} records found, {} new, {} queries sent\n",
        summary.resumed_records, summary.new_records, summary.api_calls
    );

    // The report is plain JSON; pull a few headline numbers back out.
    let report = exstab::runner::emit_report(&summary.run_dir)?;
    let overall = report
        .groups
        .iter()
        .find(|g| g.group.op_type.is_none() && g.group.severity.is_none())
        .expect("overall group");
    println!(
        "overall   : flip rate {:.3} [{:.3}, {:.3}], top-5 overlap {:.3}, label consistency {:.3}",
        overall.flip_rate,
        overall.flip_rate_ci[0],
        overall.flip_rate_ci[1],
        overall.top5_overlap,
        overall.prediction_consistency
    );
    println!("\nper-operator flip rates (marginal over severities):");
    for group in &report.groups {
        if let (Some(op), None) = (group.group.op_type, group.group.severity) {
            println!(
                "  {:<16} {:.3}  [{:.3}, {:.3}]  ({} records)",
                op.name(),
                group.flip_rate,
                group.flip_rate_ci[0],
                group.flip_rate_ci[1],
                group.records
            );
        }
    }
    let profile = &report.cost_profiles[0];
    println!(
        "\ncost      : mean doc length {:.1} words -> explanation costs {:.0}x a single call; tier = {}",
        profile.mean_word_count, profile.cost_multiplier, profile.tier
    );
    println!(
        "run dir   : {} (kept until this process exits)",
        summary.run_dir.display()
    );
    Ok(())
}
