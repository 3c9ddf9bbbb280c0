use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde_json::json;
use ultraspeech_core::corpus::{read_split_manifest, UtteranceRef};
use ultraspeech_core::dsp::{write_mel_bin, MelSpectrogram, TARGET_SAMPLE_RATE};
use ultraspeech_core::features::load_utterance;
use ultraspeech_training::TrainedModel;
use ultraspeech_vocoder::{resample_mel_for_vocoder, BackendKind, Vocoder, VocoderConfig, DEFAULT_ITERATIONS, DEFAULT_VOCODER_HOP};

use crate::corpus::absolute;
use crate::{RunManifest, Settings, SynthesizeArgs, SPLIT_FILE};

pub fn vocoder_config(s: &mut Settings, backend: Option<&str>, cmd: Option<String>, seed: u64) -> Result<VocoderConfig> {
    let backend: BackendKind = s.get("vocoder.backend", backend.map(str::to_string), "fallback".to_string())?.parse()?;
    Ok(VocoderConfig {
        backend,
        cmd: s.get_opt("vocoder.cmd", cmd)?,
        hop: s.get("vocoder.hop", None, DEFAULT_VOCODER_HOP)?,
        sample_rate: s.get("vocoder.sample_rate", None, TARGET_SAMPLE_RATE)?,
        iterations: s.get("vocoder.iterations", None, DEFAULT_ITERATIONS)?,
        seed,
    })
}

pub fn run(a: &SynthesizeArgs, s: &mut Settings) -> Result<()> {
    let seed = s.get("seed", a.seed, 0u64)?;
    let backend = a.vocoder.map(|v| match v {
        crate::VocoderChoice::External => "external",
        crate::VocoderChoice::Fallback => "fallback",
    });
    let vcfg = vocoder_config(s, backend, a.vocoder_cmd.clone(), seed)?;
    let vocoder = Vocoder::from_config(&vcfg)?;

    let trained = TrainedModel::load(&a.checkpoint).with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let origin = RunManifest::read(&a.checkpoint)?;
    let speaker = origin.details["speaker"].as_str().context("checkpoint run manifest lacks the speaker")?.to_string();
    let data = match &a.data {
        Some(d) => d.clone(),
        None => PathBuf::from(origin.details["data"].as_str().context("checkpoint run manifest lacks the data directory")?),
    };
    let dir = data.join(&speaker);

    let mut ids = Vec::new();
    for u in &a.utterance {
        if u == "test" {
            ids.extend(read_split_manifest(&dir.join(SPLIT_FILE))?.test);
        } else {
            ids.push(UtteranceRef::new(&speaker, u));
        }
    }
    if ids.is_empty() {
        bail!("no utterances selected");
    }
    ids.sort();
    ids.dedup();

    let out_dir = a.out.join(&speaker);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for id in &ids {
        let utt = load_utterance(&dir, id).with_context(|| format!("loading {}/{}", id.speaker, id.utterance))?;
        let pred: Vec<f64> = trained.model.predict(&utt.frames)?.into_iter().map(f64::from).collect();
        let mel = MelSpectrogram::new_standardized(pred, utt.n_frames(), trained.stats.clone())?.destandardize()?;
        write_mel_bin(&out_dir.join(format!("{}.mel", id.utterance)), &mel)?;
        let at_hop = resample_mel_for_vocoder(&mel, utt.fps, vcfg.hop, vcfg.sample_rate)?;
        let audio = vocoder.synthesize(&at_hop).with_context(|| format!("vocoding {}/{}", id.speaker, id.utterance))?;
        audio.write_wav(&out_dir.join(format!("{}.wav", id.utterance)))?;
        log::info!("{}/{}: {} frames, {:.2} s", id.speaker, id.utterance, utt.n_frames(), audio.duration_secs());
    }
    let details = json!({
        "checkpoint": absolute(&a.checkpoint),
        "data": absolute(&data),
        "speaker": speaker,
        "utterances": ids.iter().map(|u| u.utterance.clone()).collect::<Vec<_>>(),
    });
    RunManifest::new("synthesize", Some(seed), s, details).write(&a.out)
}
