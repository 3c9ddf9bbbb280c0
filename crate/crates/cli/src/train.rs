use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use ultraspeech_core::corpus::{read_split_manifest, UtteranceRef};
use ultraspeech_core::features::{load_utterance, Utterance};
use ultraspeech_models::{ModelKind, ModelSpec};
use ultraspeech_training::{train, write_history, TrainerConfig, TrainingError, TrainingSchedule, HISTORY_FILE};

use crate::corpus::absolute;
use crate::{RunManifest, Settings, TrainArgs, SPLIT_FILE};

pub(crate) fn load_all(dir: &Path, ids: &[UtteranceRef]) -> Result<Vec<Utterance>> {
    ids.iter().map(|id| load_utterance(dir, id).with_context(|| format!("loading {}/{}", id.speaker, id.utterance))).collect()
}

pub fn schedule(s: &mut Settings) -> Result<TrainingSchedule> {
    let d = TrainingSchedule::default();
    Ok(TrainingSchedule {
        lr_initial: s.get("schedule.lr_initial", None, d.lr_initial)?,
        first_cycle_steps: s.get("schedule.first_cycle_steps", None, d.first_cycle_steps)?,
        cycle_growth: s.get("schedule.cycle_growth", None, d.cycle_growth)?,
        peak_decay: s.get("schedule.peak_decay", None, d.peak_decay)?,
        lr_min: s.get("schedule.lr_min", None, d.lr_min)?,
    })
}

pub fn run(a: &TrainArgs, s: &mut Settings) -> Result<()> {
    let seed = s.get("seed", a.seed, 0u64)?;
    let d = TrainerConfig::default();
    let cfg = TrainerConfig {
        batch_size: s.get("train.batch_size", a.batch_size, d.batch_size)?,
        max_epochs: s.get("train.max_epochs", a.max_epochs, d.max_epochs)?,
        patience: s.get("train.patience", a.patience, d.patience)?,
        weight_decay: s.get("train.weight_decay", a.weight_decay, d.weight_decay)?,
        stop_below_dev_mse: s.get_opt("train.stop_below_dev_mse", a.stop_below_dev_mse)?,
    };
    let sched = schedule(s)?;
    let kind = ModelKind::from(a.model);

    let dir = a.data.join(&a.speaker);
    let split = read_split_manifest(&dir.join(SPLIT_FILE)).with_context(|| format!("speaker {} in {}", a.speaker, a.data.display()))?;
    if split.train.is_empty() || split.dev.is_empty() {
        bail!("speaker {} has an empty train or dev split", a.speaker);
    }
    let train_set = load_all(&dir, &split.train)?;
    let dev_set = load_all(&dir, &split.dev)?;
    log::info!("training {kind} for {} on {} train / {} dev utterances", a.speaker, train_set.len(), dev_set.len());

    let spec = ModelSpec::new(kind);
    let mut details = json!({
        "speaker": a.speaker,
        "model": kind.cli_name(),
        "data": absolute(&a.data),
        "train_utterances": train_set.len(),
        "dev_utterances": dev_set.len(),
    });
    let trained = match train(&spec, &train_set, &dev_set, &sched, &cfg, seed) {
        Ok(t) => t,
        Err(TrainingError::Divergence { epoch, step, history }) => {
            std::fs::create_dir_all(&a.out)?;
            write_history(&a.out.join(HISTORY_FILE), &history)?;
            details["diverged"] = json!({ "epoch": epoch, "step": step });
            RunManifest::new("train", Some(seed), s, details).write(&a.out)?;
            bail!("training diverged at epoch {epoch}, step {step}; history written to {}", a.out.display());
        }
        Err(e) => return Err(e.into()),
    };
    trained.save(&a.out)?;
    let h = &trained.history;
    details["parameter_count"] = json!(trained.model.parameter_count());
    details["best_epoch"] = json!(h.best_epoch);
    details["best_dev_mse"] = json!(h.best_dev_mse);
    details["stopped_epoch"] = json!(h.stopped_epoch);
    details["mean_epoch_seconds"] = json!(h.mean_epoch_seconds());
    log::info!("best dev MSE {:.4} at epoch {} of {}", h.best_dev_mse, h.best_epoch, h.stopped_epoch);
    RunManifest::new("train", Some(seed), s, details).write(&a.out)
}
