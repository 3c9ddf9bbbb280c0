use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ultraspeech_core::dsp::MelStats;
use ultraspeech_core::features::Utterance;
use ultraspeech_models::{Model, ModelSpec};
use ultraspeech_nn::{Graph, Mode, Tensor};

use crate::data::FrameDataset;
use crate::early_stop::{EarlyStopper, StopDecision};
use crate::optimizer::{optimizer_step, AdamState};
use crate::schedule::TrainingSchedule;
use crate::{Result, TrainingError};

pub const HISTORY_FILE: &str = "history.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    /// Ends training as soon as the development MSE drops below this value.
    pub stop_below_dev_mse: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self { batch_size: 128, max_epochs: 20, patience: 3, weight_decay: 0.01, stop_below_dev_mse: None }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(TrainingError::Config("batch_size, patience and max_epochs must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(TrainingError::Config(format!("weight decay {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss of the epoch's mini-batches, dropout active.
    pub train_loss: f64,
    pub dev_mse: f64,
    pub steps: u64,
    pub skipped_steps: u64,
    pub lr_first: f64,
    pub lr_last: f64,
    /// Wall clock of the optimization pass alone.
    pub train_seconds: f64,
    pub dev_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Learning rate used at every optimizer step.
    pub lr_trace: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_dev_mse: f64,
}

impl TrainingHistory {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.train_seconds).sum::<f64>() / self.epochs.len() as f64
    }
}

/// Writes one JSON line per epoch.
pub fn write_history(path: &Path, history: &TrainingHistory) -> Result<()> {
    let io = |e| TrainingError::Io { path: path.to_path_buf(), source: e };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for e in &history.epochs {
        writeln!(out, "{}", serde_json::to_string(e).expect("serializable record")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Weights of the best development epoch with the statistics used to
/// standardize its targets.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: Model<f32>,
    pub stats: MelStats,
    pub history: TrainingHistory,
}

/// Mean squared error of `model` over a whole dataset, inference mode.
pub fn dataset_mse(model: &Model<f32>, data: &FrameDataset) -> Result<f64> {
    let pred = model.predict(data.frames())?;
    let sum: f64 = pred.iter().zip(data.targets()).map(|(&p, &t)| (p as f64 - t as f64).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

fn step_seed(seed: u64, step: u64) -> u64 {
    seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains `spec` on `train_set`, early-stopping on the MSE over `dev_set`.
///
/// Targets are log-mels standardized with statistics of `train_set`. Every
/// epoch visits all training frames once in a fresh seeded shuffle. The
/// returned weights are those of the epoch with the lowest development MSE.
pub fn train(spec: &ModelSpec, train_set: &[Utterance], dev_set: &[Utterance], schedule: &TrainingSchedule, cfg: &TrainerConfig, seed: u64) -> Result<TrainedModel> {
    schedule.validate()?;
    cfg.validate()?;
    spec.validate_pipeline_io()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(TrainingError::Config("train and dev sets must be non-empty".into()));
    }
    let stats = MelStats::from_mels(train_set.iter().map(|u| &u.mel))?;
    let train_data = FrameDataset::from_utterances(train_set, &stats)?;
    let dev_data = FrameDataset::from_utterances(dev_set, &stats)?;

    let mut model = Model::<f32>::new(spec.clone(), seed)?;
    let mut state = AdamState::new(model.params());
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = TrainingHistory::default();
    let mut best = model.params().clone();
    let (mut frames, mut targets) = (Vec::new(), Vec::new());
    let mut step = 0u64;
    let (frame_len, out_dim) = (spec.frame_len(), spec.output_dim);
    info!("training {} ({} parameters) on {} frames, {} dev frames", spec.kind, model.parameter_count(), train_data.len(), dev_data.len());

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut seen, mut skipped) = (0.0, 0usize, 0u64);
        let lr_first = schedule.learning_rate_at(step);
        for batch in order.chunks(cfg.batch_size) {
            train_data.gather(batch, &mut frames, &mut targets);
            let lr = schedule.learning_rate_at(step);
            let (loss, grads) = {
                let mut g = Graph::with_seed(model.params(), Mode::Train, step_seed(seed, step));
                let x = g.constant(Tensor::from_vec(&[batch.len(), frame_len], frames.clone())?);
                let t = g.constant(Tensor::from_vec(&[batch.len(), out_dim], targets.clone())?);
                let y = model.forward(&mut g, x)?;
                let loss = g.mse(y, t)?;
                (g.value(loss).data()[0] as f64, g.backward(loss).into_params())
            };
            if !loss.is_finite() {
                history.stopped_epoch = epoch;
                return Err(TrainingError::Divergence { epoch, step, history: Box::new(history) });
            }
            match optimizer_step(model.params_mut(), &grads, &mut state, lr, cfg.weight_decay) {
                Ok(()) => {}
                Err(TrainingError::Numeric(msg)) => {
                    warn!("epoch {epoch}, step {step}: {msg}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
            history.lr_trace.push(lr);
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
            step += 1;
        }
        let train_seconds = started.elapsed().as_secs_f64();
        let dev_started = Instant::now();
        let dev_mse = dataset_mse(&model, &dev_data)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            dev_mse,
            steps: step,
            skipped_steps: skipped,
            lr_first,
            lr_last: *history.lr_trace.last().expect("at least one step"),
            train_seconds,
            dev_seconds: dev_started.elapsed().as_secs_f64(),
        };
        info!("epoch {epoch}: train loss {:.4}, dev MSE {:.4}, {:.1}s", record.train_loss, dev_mse, train_seconds);
        history.epochs.push(record);
        history.stopped_epoch = epoch;
        let decision = stopper.observe(epoch, dev_mse);
        if decision == StopDecision::Improved {
            best = model.params().clone();
        }
        if decision == StopDecision::Stop {
            info!("dev MSE has not improved for {} epochs; stopping", cfg.patience);
            break;
        }
        if cfg.stop_below_dev_mse.is_some_and(|target| dev_mse < target) {
            info!("dev MSE below target; stopping");
            break;
        }
    }
    let (best_epoch, best_dev_mse) = stopper.best().ok_or_else(|| TrainingError::Numeric("no finite development MSE in any epoch".into()))?;
    history.best_epoch = best_epoch;
    history.best_dev_mse = best_dev_mse;
    let model = Model::from_params(spec.clone(), best)?;
    Ok(TrainedModel { model, stats, history })
}
