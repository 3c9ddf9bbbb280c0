use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use ultraspeech_core::corpus::{generate_synthetic_corpus, load_speaker, split_corpus, store_recording, write_split_manifest, SYNTHETIC_SPEAKER};
use ultraspeech_core::dsp::write_mel_png;
use ultraspeech_core::features::{preprocess_recording, store_utterance};

use crate::{GenerateArgs, PreprocessArgs, RunManifest, Settings, SPLIT_FILE};

pub fn generate(a: &GenerateArgs, s: &mut Settings) -> Result<()> {
    let seed = s.get("seed", a.seed, 0u64)?;
    let n = s.get("corpus.utterances", a.utterances, 24usize)?;
    let min = s.get("corpus.min_frames", a.min_frames, 40usize)?;
    let max = s.get("corpus.max_frames", a.max_frames, 80usize)?;
    let recordings = generate_synthetic_corpus(seed, n, (min, max))?;
    let dir = a.out.join(SYNTHETIC_SPEAKER);
    for rec in &recordings {
        store_recording(&dir, rec)?;
    }
    log::info!("wrote {} synthetic utterances to {}", recordings.len(), dir.display());
    RunManifest::new("generate-corpus", Some(seed), s, json!({ "speaker": SYNTHETIC_SPEAKER, "utterances": recordings.len() })).write(&a.out)
}

/// Subdirectories of `root` that contain at least one `.ult` file.
fn speaker_dirs(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).with_context(|| format!("listing {}", root.display()))? {
        let path = entry?.path();
        if !path.is_dir() {
            continue;
        }
        let has_ult = std::fs::read_dir(&path)?.flatten().any(|e| e.path().extension().is_some_and(|x| x == "ult"));
        if has_ult {
            out.push(path.file_name().expect("directory name").to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

pub fn preprocess(a: &PreprocessArgs, s: &mut Settings) -> Result<()> {
    let seed = s.get("seed", a.seed, 0u64)?;
    let speakers = if a.speaker.is_empty() { speaker_dirs(&a.data_dir)? } else { a.speaker.clone() };
    if speakers.is_empty() {
        bail!("no speaker directories with .ult files under {}", a.data_dir.display());
    }
    let mut summary = Vec::new();
    for speaker in &speakers {
        let recordings = load_speaker(&a.data_dir.join(speaker)).with_context(|| format!("loading speaker {speaker}"))?;
        if recordings.is_empty() {
            bail!("speaker {speaker} has no recordings");
        }
        for rec in &recordings {
            for w in rec.warnings() {
                log::warn!("{speaker}/{}: {w}", rec.utterance_id);
            }
        }
        let split = split_corpus(&recordings, seed)?;
        let out: PathBuf = a.out.join(speaker);
        for rec in &recordings {
            let utt = preprocess_recording(rec).with_context(|| format!("preprocessing {speaker}/{}", rec.utterance_id))?;
            store_utterance(&out, &utt)?;
            if a.plots {
                write_mel_png(&out.join(format!("{}.png", rec.utterance_id)), &utt.mel)?;
            }
        }
        write_split_manifest(&out.join(SPLIT_FILE), &split)?;
        log::info!("{speaker}: {} train, {} dev, {} test utterances", split.train.len(), split.dev.len(), split.test.len());
        summary.push(json!({ "speaker": speaker, "train": split.train.len(), "dev": split.dev.len(), "test": split.test.len() }));
    }
    let details = json!({ "data_dir": absolute(&a.data_dir), "speakers": summary });
    RunManifest::new("preprocess", Some(seed), s, details).write(&a.out)
}

pub(crate) fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}
