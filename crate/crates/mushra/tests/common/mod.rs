#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ultraspeech_core::AudioClip;
use ultraspeech_mushra::{Manifest, MushraService, NextTrial, StimulusSet, TrialPayload};

pub const SYSTEMS: [&str; 5] = ["hidden_reference", "anchor", "baseline", "conformer", "conformer-bilstm"];

fn tone(path: &Path, hz: f64) {
    let samples = (0..2205).map(|n| (0.3 * (std::f64::consts::TAU * hz * n as f64 / 22050.0).sin()) as f32).collect();
    AudioClip::new(samples, 22050).unwrap().write_wav(path).unwrap();
}

/// `speakers × utterances` stimulus sets whose condition files are named
/// `<condition>.wav`, so a test can recover the condition behind any
/// served audio slot from the path alone.
pub fn manifest(root: &Path, speakers: usize, utterances: usize, seed: u64) -> Manifest {
    let mut sets = Vec::new();
    for s in 0..speakers {
        for u in 0..utterances {
            let (speaker, utterance) = (format!("spk{s}"), format!("{:03}_xaud", u + 1));
            let dir = root.join(&speaker).join(&utterance);
            std::fs::create_dir_all(&dir).unwrap();
            let reference = dir.join("reference.wav");
            tone(&reference, 200.0 + u as f64);
            let mut conditions = BTreeMap::new();
            for (i, c) in SYSTEMS.iter().enumerate() {
                let p = dir.join(format!("{c}.wav"));
                tone(&p, 300.0 + 10.0 * i as f64);
                conditions.insert(c.to_string(), p);
            }
            sets.push(StimulusSet { speaker, utterance, reference, conditions });
        }
    }
    Manifest { systems: SYSTEMS.map(String::from).to_vec(), utterances: sets, seed }
}

pub fn condition_of(path: &Path) -> String {
    path.file_stem().unwrap().to_str().unwrap().to_string()
}

/// `(speaker, utterance)` of the stimulus set a path belongs to.
pub fn utterance_of(path: &Path) -> (String, String) {
    let dir = path.parent().unwrap();
    let utt = dir.file_name().unwrap().to_str().unwrap().to_string();
    let spk = dir.parent().unwrap().file_name().unwrap().to_str().unwrap().to_string();
    (spk, utt)
}

pub fn open_trial(svc: &mut MushraService, session: &str) -> TrialPayload {
    match svc.next_trial(session).unwrap() {
        NextTrial::Open { trial } => trial,
        NextTrial::Completed => panic!("session {session} completed early"),
    }
}

/// Condition name behind every label of a served trial.
pub fn reveal(svc: &MushraService, trial: &TrialPayload) -> BTreeMap<String, String> {
    trial
        .conditions
        .iter()
        .map(|slot| (slot.label.clone(), condition_of(&svc.audio_path(&trial.session_id, trial.trial_index, &slot.label).unwrap())))
        .collect()
}

pub fn data_dir(root: &Path) -> PathBuf {
    root.join("data")
}
