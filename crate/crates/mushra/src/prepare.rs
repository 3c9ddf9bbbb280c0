use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ultraspeech_core::dsp::add_white_noise_anchor;
use ultraspeech_core::AudioClip;

use crate::experiment::{Experiment, Manifest, StimulusSet, ANCHOR, HIDDEN_REFERENCE};
use crate::service::REFERENCE_SLOT;
use crate::{io_err, MushraError, Result};

pub const DEFAULT_ANCHOR_LEVEL: f64 = 0.0005;
pub const DEFAULT_UTTERANCES_PER_SPEAKER: usize = 5;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Inputs of [`prepare_experiment`]. Every directory is laid out as
/// `<speaker>/<utterance>.wav`.
#[derive(Clone, Debug)]
pub struct PrepareConfig {
    /// Natural recordings.
    pub reference_dir: PathBuf,
    /// Synthesized outputs per named system.
    pub systems: Vec<(String, PathBuf)>,
    pub utterances_per_speaker: usize,
    /// Standard deviation of the anchor's additive white noise.
    pub noise_level: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn wav_stems(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "wav") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

/// Picks up to `utterances_per_speaker` utterances per speaker among those
/// every system has synthesized, writes the stimuli as 16-bit PCM under
/// `out_dir/stimuli/<speaker>/<utterance>/` together with a hidden copy of
/// the reference and a white-noise anchor, and writes the manifest to
/// `out_dir/manifest.json`.
pub fn prepare_experiment(cfg: &PrepareConfig) -> Result<Manifest> {
    let bad = |m: String| MushraError::Manifest(m);
    if cfg.systems.is_empty() {
        return Err(bad("at least one system is needed".into()));
    }
    if cfg.utterances_per_speaker == 0 {
        return Err(bad("utterances_per_speaker must be positive".into()));
    }
    let mut names = BTreeSet::new();
    for (name, _) in &cfg.systems {
        let reserved = [HIDDEN_REFERENCE, ANCHOR, REFERENCE_SLOT].contains(&name.as_str());
        let usable = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if reserved || !usable || !names.insert(name.as_str()) {
            return Err(bad(format!("invalid or duplicate system name `{name}`")));
        }
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let out_dir = cfg.out_dir.canonicalize().map_err(io_err(&cfg.out_dir))?;

    let mut speakers = Vec::new();
    for entry in std::fs::read_dir(&cfg.reference_dir).map_err(io_err(&cfg.reference_dir))? {
        let path = entry.map_err(io_err(&cfg.reference_dir))?.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|s| s.to_str()) {
                speakers.push(name.to_string());
            }
        }
    }
    speakers.sort();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut utterances = Vec::new();
    for speaker in &speakers {
        let mut common = wav_stems(&cfg.reference_dir.join(speaker))?;
        for (_, dir) in &cfg.systems {
            let dir = dir.join(speaker);
            let have = if dir.is_dir() { wav_stems(&dir)? } else { BTreeSet::new() };
            common.retain(|u| have.contains(u));
        }
        let mut pool: Vec<String> = common.into_iter().collect();
        if pool.is_empty() {
            continue;
        }
        if pool.len() < cfg.utterances_per_speaker {
            log::warn!("speaker {speaker}: only {} utterances synthesized by every system", pool.len());
        }
        pool.shuffle(&mut rng);
        pool.truncate(cfg.utterances_per_speaker);
        pool.sort();
        for utt in pool {
            utterances.push((speaker.clone(), utt));
        }
    }
    if utterances.is_empty() {
        return Err(bad("no utterance is available for every system".into()));
    }

    let mut sets = Vec::new();
    for (i, (speaker, utt)) in utterances.iter().enumerate() {
        let dir = out_dir.join("stimuli").join(speaker).join(utt);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let reference = AudioClip::read_wav_unscaled(&cfg.reference_dir.join(speaker).join(format!("{utt}.wav")))?;
        let write = |name: &str, clip: &AudioClip| -> Result<PathBuf> {
            let path = dir.join(format!("{name}.wav"));
            clip.write_wav(&path)?;
            Ok(path)
        };
        let mut conditions = BTreeMap::new();
        let reference_path = write(REFERENCE_SLOT, &reference)?;
        conditions.insert(HIDDEN_REFERENCE.to_string(), write(HIDDEN_REFERENCE, &reference)?);
        let anchor = add_white_noise_anchor(&reference, cfg.noise_level, cfg.seed.wrapping_add(i as u64))?;
        conditions.insert(ANCHOR.to_string(), write(ANCHOR, &anchor)?);
        for (name, sys_dir) in &cfg.systems {
            let clip = AudioClip::read_wav_unscaled(&sys_dir.join(speaker).join(format!("{utt}.wav")))?;
            conditions.insert(name.clone(), write(name, &clip)?);
        }
        sets.push(StimulusSet { speaker: speaker.clone(), utterance: utt.clone(), reference: reference_path, conditions });
    }

    let mut systems = vec![HIDDEN_REFERENCE.to_string(), ANCHOR.to_string()];
    systems.extend(cfg.systems.iter().map(|(n, _)| n.clone()));
    let manifest = Manifest { systems, utterances: sets, seed: cfg.seed };
    Experiment::from_manifest(manifest.clone())?;
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifest)
}
