use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ultraspeech_core::dsp::MelStats;
use ultraspeech_models::{load_checkpoint, save_checkpoint};

use crate::trainer::{write_history, EpochRecord, TrainedModel, TrainingHistory, HISTORY_FILE};
use crate::{Result, TrainingError};

/// Metadata stored in the checkpoint manifest next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainingSummary {
    mel_stats: MelStats,
    best_epoch: usize,
    best_dev_mse: f64,
    stopped_epoch: usize,
}

impl TrainedModel {
    /// Writes the checkpoint (weights, manifest with the mel statistics and
    /// a history summary) and `history.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let summary = TrainingSummary {
            mel_stats: self.stats.clone(),
            best_epoch: self.history.best_epoch,
            best_dev_mse: self.history.best_dev_mse,
            stopped_epoch: self.history.stopped_epoch,
        };
        save_checkpoint(dir, &self.model, serde_json::to_value(summary).expect("summary serializes"))?;
        write_history(&dir.join(HISTORY_FILE), &self.history)
    }

    /// Inverse of [`TrainedModel::save`]. The per-step learning-rate trace
    /// is not persisted and comes back empty.
    pub fn load(dir: &Path) -> Result<Self> {
        let (model, manifest) = load_checkpoint(dir)?;
        let summary: TrainingSummary = serde_json::from_value(manifest.extra)
            .map_err(|e| TrainingError::Config(format!("{}: checkpoint lacks training metadata ({e})", dir.display())))?;
        summary.mel_stats.validate()?;
        let path = dir.join(HISTORY_FILE);
        let mut epochs = Vec::new();
        if path.exists() {
            let io = |e| TrainingError::Io { path: path.clone(), source: e };
            let file = std::fs::File::open(&path).map_err(io)?;
            for line in std::io::BufReader::new(file).lines() {
                let line = line.map_err(|e| TrainingError::Io { path: path.clone(), source: e })?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: EpochRecord = serde_json::from_str(&line).map_err(|e| TrainingError::Config(format!("{}: {e}", path.display())))?;
                epochs.push(record);
            }
        }
        let history = TrainingHistory {
            epochs,
            lr_trace: Vec::new(),
            stopped_epoch: summary.stopped_epoch,
            best_epoch: summary.best_epoch,
            best_dev_mse: summary.best_dev_mse,
        };
        Ok(Self { model, stats: summary.mel_stats, history })
    }
}
