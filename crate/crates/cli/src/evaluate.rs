use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use ultraspeech_core::corpus::read_split_manifest;
use ultraspeech_core::dsp::{read_mel_bin, MelStats};
use ultraspeech_core::AudioClip;
use ultraspeech_evaluation::{build_report, sentence_mcd, sentence_mse, SentenceScore, SystemScores};

use crate::corpus::absolute;
use crate::{EvaluateArgs, RunManifest, Settings, REPORT_JSON, REPORT_JSONL, REPORT_TABLES, SPLIT_FILE};

/// Speaker directories of a system output holding at least one `.mel`.
fn system_speakers(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() && std::fs::read_dir(&path)?.flatten().any(|e| e.path().extension().is_some_and(|x| x == "mel")) {
            out.insert(path.file_name().expect("directory name").to_string_lossy().into_owned());
        }
    }
    Ok(out)
}

fn file(dir: &Path, utt: &str, ext: &str) -> std::path::PathBuf {
    dir.join(format!("{utt}.{ext}"))
}

pub fn run(a: &EvaluateArgs, s: &mut Settings) -> Result<()> {
    let names: BTreeSet<&str> = a.systems.iter().map(|(n, _)| n.as_str()).collect();
    if names.len() != a.systems.len() {
        bail!("system names must be unique");
    }
    let baseline = a.baseline.clone().unwrap_or_else(|| a.systems[0].0.clone());
    let mut speakers = BTreeSet::new();
    for (_, dir) in &a.systems {
        speakers.extend(system_speakers(dir)?);
    }
    if speakers.is_empty() {
        bail!("no synthesized mels found in any system directory");
    }

    let mut scores: Vec<SystemScores> = a.systems.iter().map(|(n, _)| SystemScores { system: n.clone(), sentences: Vec::new() }).collect();
    for speaker in &speakers {
        let ref_dir = a.data.join(speaker);
        let split = read_split_manifest(&ref_dir.join(SPLIT_FILE)).with_context(|| format!("reference split for {speaker}"))?;
        let train_mels = split.train.iter().map(|u| read_mel_bin(&file(&ref_dir, &u.utterance, "mel"))).collect::<Result<Vec<_>, _>>()?;
        let stats = MelStats::from_mels(&train_mels)?;
        for id in &split.test {
            let ref_mel = read_mel_bin(&file(&ref_dir, &id.utterance, "mel"))?.standardize(&stats)?;
            let ref_audio = AudioClip::read_wav_unscaled(&file(&ref_dir, &id.utterance, "wav"))?;
            for ((name, dir), out) in a.systems.iter().zip(&mut scores) {
                let sys_dir = dir.join(speaker);
                let mel_path = file(&sys_dir, &id.utterance, "mel");
                if !mel_path.exists() {
                    bail!("system {name} has no output for test sentence {speaker}/{}", id.utterance);
                }
                let pred = read_mel_bin(&mel_path)?.standardize(&stats)?;
                let audio = AudioClip::read_wav_unscaled(&file(&sys_dir, &id.utterance, "wav"))?;
                let mse = sentence_mse(&pred, &ref_mel).with_context(|| format!("{name}: {speaker}/{}", id.utterance))?;
                let mcd = sentence_mcd(&ref_audio, &audio).with_context(|| format!("{name}: {speaker}/{}", id.utterance))?;
                out.sentences.push(SentenceScore { speaker: speaker.clone(), utterance: id.utterance.clone(), mse, mcd });
            }
        }
    }

    let report = build_report(&scores, &baseline)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let tables = format!("{}\n{}", report.mse_table(), report.mcd_table());
    std::fs::write(a.out.join(REPORT_TABLES), &tables)?;
    std::fs::write(a.out.join(REPORT_JSONL), report.to_jsonl())?;
    std::fs::write(a.out.join(REPORT_JSON), serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    print!("{tables}");
    let details = json!({
        "data": absolute(&a.data),
        "baseline": baseline,
        "systems": a.systems.iter().map(|(n, d)| json!({ "name": n, "dir": absolute(d) })).collect::<Vec<_>>(),
        "speakers": speakers,
        "finite": report.is_finite(),
    });
    RunManifest::new("evaluate", None, s, details).write(&a.out)
}
