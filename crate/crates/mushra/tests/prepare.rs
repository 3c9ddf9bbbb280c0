use std::path::Path;

use ultraspeech_core::AudioClip;
use ultraspeech_mushra::{prepare_experiment, MushraError, MushraService, PrepareConfig, ANCHOR, HIDDEN_REFERENCE, MANIFEST_FILE};

fn write_tone(path: &Path, hz: f64, amp: f64) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let samples = (0..4410).map(|n| (amp * (std::f64::consts::TAU * hz * n as f64 / 22050.0).sin()) as f32).collect();
    AudioClip::new(samples, 22050).unwrap().write_wav(path).unwrap();
}

/// Four speakers with eight natural utterances each; two systems that
/// synthesized the last six of them, one of which skipped `008` of spk3.
fn corpus(root: &Path) -> PrepareConfig {
    for s in 0..4 {
        for u in 1..=8 {
            write_tone(&root.join(format!("ref/spk{s}/{u:03}.wav")), 150.0 + u as f64, 0.5);
            for (k, sys) in ["baseline", "conformer"].iter().enumerate() {
                if u >= 3 && !(s == 3 && u == 8 && k == 1) {
                    write_tone(&root.join(format!("{sys}/spk{s}/{u:03}.wav")), 400.0 + 50.0 * k as f64, 0.4);
                }
            }
        }
    }
    PrepareConfig {
        reference_dir: root.join("ref"),
        systems: vec![("baseline".into(), root.join("baseline")), ("conformer".into(), root.join("conformer"))],
        utterances_per_speaker: 5,
        noise_level: 0.0005,
        seed: 3,
        out_dir: root.join("out"),
    }
}

#[test]
fn selects_five_common_utterances_per_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = corpus(dir.path());
    let m = prepare_experiment(&cfg).unwrap();
    assert_eq!(m.systems, [HIDDEN_REFERENCE, ANCHOR, "baseline", "conformer"]);
    assert_eq!(m.utterances.len(), 20);
    for s in 0..4 {
        let picked: Vec<&str> = m.utterances.iter().filter(|u| u.speaker == format!("spk{s}")).map(|u| u.utterance.as_str()).collect();
        assert_eq!(picked.len(), 5);
        assert!(picked.iter().all(|u| !["001", "002"].contains(u)));
        if s == 3 {
            assert!(!picked.contains(&"008"));
        }
    }
    // The manifest on disk is what was returned, and the service accepts it.
    let on_disk: ultraspeech_mushra::Manifest = serde_json::from_slice(&std::fs::read(cfg.out_dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, m);
    let mut svc = MushraService::open(&dir.path().join("data")).unwrap();
    let exp = svc.create_experiment(on_disk).unwrap();
    assert_eq!(svc.create_session(&exp.id, serde_json::Value::Null, None).unwrap().trials, 20);
}

#[test]
fn anchor_is_the_reference_plus_faint_noise() {
    let dir = tempfile::tempdir().unwrap();
    let m = prepare_experiment(&corpus(dir.path())).unwrap();
    for set in &m.utterances {
        let reference = AudioClip::read_wav_unscaled(&set.reference).unwrap();
        let hidden = AudioClip::read_wav_unscaled(&set.conditions[HIDDEN_REFERENCE]).unwrap();
        let anchor = AudioClip::read_wav_unscaled(&set.conditions[ANCHOR]).unwrap();
        assert_eq!(reference, hidden);
        assert_eq!(reference.len(), anchor.len());
        let diff: Vec<f64> = reference.samples().iter().zip(anchor.samples()).map(|(a, b)| (b - a) as f64).collect();
        let rms = (diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64).sqrt();
        // 16-bit quantization adds about 1e-5 on top of the 5e-4 noise.
        assert!((rms - 0.0005).abs() < 0.0001, "anchor noise rms {rms}");
    }
}

#[test]
fn preparation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = corpus(dir.path());
    let a = prepare_experiment(&cfg).unwrap();
    let first_anchor = std::fs::read(&a.utterances[0].conditions[ANCHOR]).unwrap();
    cfg.out_dir = dir.path().join("out2");
    let b = prepare_experiment(&cfg).unwrap();
    let names = |m: &ultraspeech_mushra::Manifest| m.utterances.iter().map(|u| (u.speaker.clone(), u.utterance.clone())).collect::<Vec<_>>();
    assert_eq!(names(&a), names(&b));
    assert_eq!(first_anchor, std::fs::read(&b.utterances[0].conditions[ANCHOR]).unwrap());
}

#[test]
fn rejects_reserved_names_and_empty_selections() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = corpus(dir.path());
    cfg.systems[0].0 = ANCHOR.into();
    assert!(matches!(prepare_experiment(&cfg), Err(MushraError::Manifest(_))));
    let mut cfg = corpus(dir.path());
    cfg.systems[1].1 = dir.path().join("missing");
    assert!(matches!(prepare_experiment(&cfg), Err(MushraError::Manifest(_))));
}
