//! The four subcommands. Each run writes a `manifest.json` with the resolved
//! config so results stay reproducible from their outputs alone.

use std::path::Path;

use serde::Serialize;

use realm_core::check;
use realm_core::model::PretrainReport;

use crate::config::{sweep_key, RunConfig};
use crate::io;
use crate::pipeline;
use crate::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct PretrainOutput {
    seed: u64,
    final_accuracy: f64,
    converged: bool,
    accuracy_floor: f64,
    epochs: usize,
    samples: usize,
}

/// Pretrains the source model and writes `model.json` plus a report.
pub fn cmd_pretrain(config: &RunConfig) -> CliResult<()> {
    config.validate()?;
    let out = io::ensure_out_dir(&config.out_dir)?;
    let (model, report) = pipeline::pretrain_model(config)?;
    io::save_model(&out.join("model.json"), &model)?;
    let output = pretrain_output(config, &report);
    io::write_file(&out.join("pretrain_report.json"), &io::to_json_pretty(&output)?)?;
    write_manifest(config, "pretrain", &out)?;
    println!(
        "pretrained model: accuracy {:.4} over {} samples ({})",
        report.final_accuracy,
        report.samples,
        if output.converged { "converged" } else { "below accuracy floor" }
    );
    println!("wrote {}", out.join("model.json").display());
    Ok(())
}

fn pretrain_output(config: &RunConfig, report: &PretrainReport) -> PretrainOutput {
    PretrainOutput {
        seed: config.seed,
        final_accuracy: report.final_accuracy,
        converged: report.final_accuracy >= config.accuracy_floor,
        accuracy_floor: config.accuracy_floor,
        epochs: report.epochs,
        samples: report.samples,
    }
}

/// Adapts a pretrained model over the target stream, writing the step CSV
/// and the summary JSON.
pub fn cmd_adapt(config: &RunConfig, model_path: &Path) -> CliResult<()> {
    config.validate()?;
    let out = io::ensure_out_dir(&config.out_dir)?;
    let model = io::load_model(model_path)?;
    let (records, summary) = pipeline::adapt_pretrained(config, model)?;
    io::write_file(&out.join("steps.csv"), &io::steps_csv(&records))?;
    io::write_file(&out.join("summary.json"), &io::to_json_pretty(&summary)?)?;
    write_manifest(config, "adapt", &out)?;
    match summary.final_accuracy {
        Some(acc) => println!(
            "{}: accuracy {:.4}, {} updates over {} steps, collapse: {}",
            summary.strategy, acc, summary.updates_applied, summary.steps_seen, summary.collapse
        ),
        None => println!(
            "{}: {} updates over {} steps (no labels)",
            summary.strategy, summary.updates_applied, summary.steps_seen
        ),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    axis: String,
    value: String,
    strategy: String,
    source_accuracy: f64,
    final_accuracy: Option<f64>,
    updates_applied: u64,
    steps_seen: u64,
    collapse: bool,
    final_alpha: f64,
    final_lambda: f64,
}

/// Runs the full pipeline once per axis value and writes one aggregate row
/// each, ordered by value.
pub fn cmd_sweep(config: &RunConfig, axis: &str, values: &[String]) -> CliResult<()> {
    config.validate()?;
    let key = sweep_key(axis)?;
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".to_string()));
    }
    let out = io::ensure_out_dir(&config.out_dir)?;

    let mut ordered: Vec<String> = values.to_vec();
    // Deterministic aggregation order: numeric when possible, lexical otherwise.
    ordered.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        _ => a.cmp(b),
    });

    let mut rows = Vec::with_capacity(ordered.len());
    let mut summaries = Vec::with_capacity(ordered.len());
    for value in &ordered {
        let mut run_config = config.clone();
        run_config.apply(key, value)?;
        run_config.validate()?;
        let (_, summary, pretrain_report) = pipeline::run_adaptation(&run_config)?;
        rows.push(SweepRow {
            axis: axis.to_string(),
            value: value.clone(),
            strategy: summary.strategy.clone(),
            source_accuracy: pretrain_report.final_accuracy,
            final_accuracy: summary.final_accuracy,
            updates_applied: summary.updates_applied,
            steps_seen: summary.steps_seen,
            collapse: summary.collapse,
            final_alpha: summary.final_alpha,
            final_lambda: summary.final_lambda,
        });
        summaries.push(summary);
    }

    let mut csv = String::from(
        "axis,value,strategy,source_accuracy,final_accuracy,updates_applied,steps_seen,collapse,final_alpha,final_lambda\n",
    );
    for r in &rows {
        let acc = r.final_accuracy.map(|a| a.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.axis,
            r.value,
            r.strategy,
            r.source_accuracy,
            acc,
            r.updates_applied,
            r.steps_seen,
            r.collapse as u8,
            r.final_alpha,
            r.final_lambda
        ));
    }
    io::write_file(&out.join("sweep.csv"), &csv)?;
    io::write_file(&out.join("sweep_summaries.json"), &io::to_json_pretty(&summaries)?)?;
    write_manifest(config, "sweep", &out)?;
    for r in &rows {
        let acc = r
            .final_accuracy
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{} = {}: strategy {}, accuracy {}, updates {}/{}",
            r.axis, r.value, r.strategy, acc, r.updates_applied, r.steps_seen
        );
    }
    Ok(())
}

/// Runs the invariant suite and prints one pass/fail line per property.
/// Returns an error (exit 1) when any property fails.
pub fn cmd_check() -> CliResult<()> {
    let results = check::run_all();
    let mut all_pass = true;
    for r in &results {
        all_pass &= r.pass;
        println!(
            "{} {:<45} max_dev {:>12.3e} (tolerance {:.3e})",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.max_dev,
            r.tolerance
        );
    }
    if all_pass {
        println!("all {} properties hold", results.len());
        Ok(())
    } else {
        Err(CliError::Runtime("invariant suite failed".to_string()))
    }
}

fn write_manifest(config: &RunConfig, command: &str, out: &Path) -> CliResult<()> {
    let manifest = io::Manifest::new(command, config.resolved_map());
    io::write_file(&out.join("manifest.json"), &io::to_json_pretty(&manifest)?)
}
