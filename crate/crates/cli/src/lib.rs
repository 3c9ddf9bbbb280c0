//! Command-line driver: corpus generation, preprocessing, training,
//! synthesis, objective evaluation and listening-test preparation/serving.
//!
//! Every subcommand writes a `run.json` into its output directory recording
//! the tool version, arguments, seed and every resolved setting.

pub mod config;
mod corpus;
mod evaluate;
pub mod manifest;
mod mushra;
mod synthesize;
mod train;

use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ultraspeech_models::ModelKind;
use ultraspeech_vocoder::BackendKind;

pub use config::{ConfigFile, Settings};
pub use manifest::{RunManifest, RUN_MANIFEST};

/// File names inside a preprocessed speaker directory.
pub const SPLIT_FILE: &str = "split.jsonl";
/// Evaluation outputs.
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_TABLES: &str = "tables.txt";

#[derive(Debug, Parser)]
#[command(name = "ultraspeech", version, about = "Ultrasound tongue imaging to speech: preprocess, train, synthesize, evaluate")]
pub struct Cli {
    /// Key:value configuration file. Flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic single-speaker corpus (.ult/.param/.wav).
    GenerateCorpus(GenerateArgs),
    /// Split a raw corpus and write model-ready frames, mels and audio.
    Preprocess(PreprocessArgs),
    /// Train one speaker-specific model and write its checkpoint and history.
    Train(TrainArgs),
    /// Predict mels for utterances with a checkpoint and vocode them.
    Synthesize(SynthesizeArgs),
    /// Score synthesized systems against the references (MSE, MCD, U-test).
    Evaluate(EvaluateArgs),
    /// MUSHRA listening tests.
    #[command(subcommand)]
    Mushra(MushraCommand),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Corpus root; recordings go to `<out>/<speaker>/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed [config: seed, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of utterances [config: corpus.utterances, default 24].
    #[arg(long)]
    pub utterances: Option<usize>,
    /// Shortest utterance in frames [config: corpus.min_frames, default 40].
    #[arg(long)]
    pub min_frames: Option<usize>,
    /// Longest utterance in frames [config: corpus.max_frames, default 80].
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus root holding one directory of recordings per speaker.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output root; each speaker gets `<out>/<speaker>/` with a split manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Only these speakers (repeatable). Default: every speaker directory.
    #[arg(long)]
    pub speaker: Vec<String>,
    /// Train/dev shuffle seed [config: seed, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a mel-spectrogram PNG per utterance.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    /// 2D-CNN baseline.
    Baseline,
    /// Conformer Base.
    Conformer,
    /// Conformer with bi-LSTM.
    ConformerBilstm,
}

impl From<ModelChoice> for ModelKind {
    fn from(c: ModelChoice) -> Self {
        match c {
            ModelChoice::Baseline => ModelKind::BaselineCnn,
            ModelChoice::Conformer => ModelKind::ConformerBase,
            ModelChoice::ConformerBilstm => ModelKind::ConformerBilstm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VocoderChoice {
    /// External neural vocoder invoked as `<cmd> --in mel.bin --out out.wav`.
    External,
    /// Built-in Griffin-Lim phase reconstruction.
    Fallback,
}

impl From<VocoderChoice> for BackendKind {
    fn from(c: VocoderChoice) -> Self {
        match c {
            VocoderChoice::External => BackendKind::External,
            VocoderChoice::Fallback => BackendKind::Fallback,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Speaker to train on.
    #[arg(long)]
    pub speaker: String,
    #[arg(long, value_enum)]
    pub model: ModelChoice,
    /// Preprocessed root written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Initialization and shuffling seed [config: seed, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames per mini-batch [config: train.batch_size, default 128].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch limit [config: train.max_epochs, default 20].
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Early-stopping patience in epochs [config: train.patience, default 3].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Decoupled weight decay [config: train.weight_decay, default 0.01].
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Stop as soon as dev MSE falls below this [config: train.stop_below_dev_mse].
    #[arg(long)]
    pub stop_below_dev_mse: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Utterance id (repeatable), or `test` for the speaker's test split.
    #[arg(long, required = true)]
    pub utterance: Vec<String>,
    /// Vocoder backend [config: vocoder.backend, default fallback].
    #[arg(long, value_enum)]
    pub vocoder: Option<VocoderChoice>,
    /// External vocoder executable [config: vocoder.cmd].
    #[arg(long)]
    pub vocoder_cmd: Option<String>,
    /// Output root; writes `<out>/<speaker>/<utt>.wav` and `<utt>.mel`.
    #[arg(long)]
    pub out: PathBuf,
    /// Preprocessed root. Default: the one the checkpoint was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Phase-initialization seed of the fallback vocoder [config: seed, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Systems as `name=dir` where dir holds `<speaker>/<utt>.{wav,mel}` (repeatable).
    #[arg(long, required = true, num_args = 1.., value_parser = parse_named_dir)]
    pub systems: Vec<(String, PathBuf)>,
    /// Preprocessed root with the reference mels, audio and split manifests.
    #[arg(long)]
    pub data: PathBuf,
    /// System the others are tested against. Default: the first one.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum MushraCommand {
    /// Build stimuli (references, hidden references, anchors, system outputs) and an experiment manifest.
    Prepare(PrepareArgs),
    /// Run the listening-test HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Natural recordings as `<speaker>/<utt>.wav`.
    #[arg(long)]
    pub reference: PathBuf,
    /// Systems as `name=dir` with `<speaker>/<utt>.wav` (repeatable).
    #[arg(long, required = true, num_args = 1.., value_parser = parse_named_dir)]
    pub systems: Vec<(String, PathBuf)>,
    /// Anchor white-noise standard deviation [config: mushra.noise_level, default 0.0005].
    #[arg(long)]
    pub noise_level: Option<f64>,
    /// Utterances per speaker [config: mushra.utterances_per_speaker, default 5].
    #[arg(long)]
    pub utterances_per_speaker: Option<usize>,
    /// Selection and anchor seed [config: seed, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for stimuli and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory holding the rating log.
    #[arg(long)]
    pub data: PathBuf,
}

fn parse_named_dir(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => Ok((name.to_string(), PathBuf::from(dir))),
        _ => Err(format!("expected NAME=DIR, got `{s}`")),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut settings = Settings::new(file);
    match cli.command {
        Command::GenerateCorpus(a) => corpus::generate(&a, &mut settings),
        Command::Preprocess(a) => corpus::preprocess(&a, &mut settings),
        Command::Train(a) => train::run(&a, &mut settings),
        Command::Synthesize(a) => synthesize::run(&a, &mut settings),
        Command::Evaluate(a) => evaluate::run(&a, &mut settings),
        Command::Mushra(MushraCommand::Prepare(a)) => mushra::prepare(&a, &mut settings),
        Command::Mushra(MushraCommand::Serve(a)) => mushra::serve(&a),
    }
}
