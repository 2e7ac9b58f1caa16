//! Output formats: the per-step CSV, summary/manifest/report JSON documents,
//! and model save/load. All output is deterministic: identical runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use realm_core::adapt::StepRecord;
use realm_core::model::ToyClassifier;

use crate::{CliError, CliResult};

/// Serializes the step log. Columns, in order:
/// `step,raw_entropy,effective_loss,weight,s_div,pred,truth,updated,alpha,lambda,anomaly`.
/// Booleans print as 0/1; a missing truth label prints as an empty field.
pub fn steps_csv(records: &[StepRecord]) -> String {
    let mut out =
        String::from("step,raw_entropy,effective_loss,weight,s_div,pred,truth,updated,alpha,lambda,anomaly\n");
    for r in records {
        let truth = r.truth.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.raw_entropy,
            r.effective_loss,
            r.weight,
            r.s_div as u8,
            r.pred,
            truth,
            r.updated as u8,
            r.alpha,
            r.lambda,
            r.anomaly as u8
        );
    }
    out
}

/// Run manifest written next to every output: resolved config plus tool
/// version, for experiment provenance.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Manifest {
            tool: "realm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
        }
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Creates the output directory and returns it as a path.
pub fn ensure_out_dir(dir: &str) -> CliResult<PathBuf> {
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path)
        .map_err(|e| CliError::Runtime(format!("cannot create output dir '{dir}': {e}")))?;
    Ok(path)
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))
}

/// Saves the model as a flat JSON document (dims, seed, parameter arrays,
/// adaptation mask).
pub fn save_model(path: &Path, model: &ToyClassifier) -> CliResult<()> {
    write_file(path, &to_json_pretty(model)?)
}

/// Loads and validates a model file.
pub fn load_model(path: &Path) -> CliResult<ToyClassifier> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read model '{}': {e}", path.display())))?;
    let model: ToyClassifier = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("bad model file '{}': {e}", path.display())))?;
    model.validate().map_err(|e| CliError::Runtime(format!("invalid model: {e}")))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_csv_has_exact_header_and_rows() {
        let records = vec![StepRecord {
            step: 0,
            raw_entropy: 0.5,
            effective_loss: 0.25,
            weight: 0.5,
            s_div: true,
            pred: 2,
            truth: None,
            updated: true,
            alpha: 0.15,
            lambda: 0.4,
            anomaly: false,
        }];
        let csv = steps_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,raw_entropy,effective_loss,weight,s_div,pred,truth,updated,alpha,lambda,anomaly"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,0.5,1,2,,1,0.15,0.4,0");
    }

    #[test]
    fn model_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = ToyClassifier::new(2, 8, 3, 42).unwrap();
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn corrupt_model_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"d_in\": 2}").unwrap();
        assert!(load_model(&path).is_err());
    }
}
