//! Run directory layout:
//!
//! ```text
//! <run>/config.cfg        key = value snapshot of the training config
//! <run>/dataset.sha256    checksum of the dataset file used
//! <run>/checkpoints/      bundle.json plus one manifest/blob pair per model
//! <run>/freqshift.csv     epoch,model_ratio,baseline_ratio
//! <run>/eval.json         evaluation summary (written by `eval`)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::bundle::TrainedBundle;
use super::config::TrainConfig;
use super::train::FrequencyShiftLog;
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.cfg";
pub const CHECKSUM_FILE: &str = "dataset.sha256";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FREQSHIFT_FILE: &str = "freqshift.csv";
pub const EVAL_FILE: &str = "eval.json";

pub fn checkpoint_dir(run: &Path) -> PathBuf {
    run.join(CHECKPOINT_DIR)
}

/// CSV with one row per epoch. The baseline column is empty when absent.
pub fn freqshift_csv(model: &FrequencyShiftLog, baseline: Option<&FrequencyShiftLog>) -> Result<String> {
    if let Some(b) = baseline {
        if b.epochs.len() != model.epochs.len() {
            return Err(Error::Length(format!(
                "model log has {} epochs, baseline {}",
                model.epochs.len(),
                b.epochs.len()
            )));
        }
    }
    let mut out = String::from("epoch,model_ratio,baseline_ratio\n");
    for (k, e) in model.epochs.iter().enumerate() {
        let b = baseline.map(|b| b.epochs[k].ratio.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", e.epoch, e.ratio, b).expect("string write");
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes everything `train` produces into `run`.
pub fn write_training_run(
    run: &Path,
    cfg: &TrainConfig,
    dataset_checksum: &str,
    bundle: &TrainedBundle,
    model_log: &FrequencyShiftLog,
    baseline_log: Option<&FrequencyShiftLog>,
) -> Result<()> {
    fs::create_dir_all(run)?;
    fs::write(run.join(CONFIG_FILE), cfg.to_text())?;
    fs::write(run.join(CHECKSUM_FILE), format!("{dataset_checksum}\n"))?;
    bundle.save(&checkpoint_dir(run))?;
    fs::write(run.join(FREQSHIFT_FILE), freqshift_csv(model_log, baseline_log)?)?;
    Ok(())
}

pub fn read_dataset_checksum(run: &Path) -> Result<String> {
    Ok(fs::read_to_string(run.join(CHECKSUM_FILE))?.trim().to_string())
}
