use std::os::unix::fs::PermissionsExt;

use ultraspeech_core::corpus::generate_synthetic_corpus;
use ultraspeech_core::dsp::{extract_mel, MelSpectrogram, MEL_FLOOR};
use ultraspeech_core::features::preprocess_recording;
use ultraspeech_core::{AudioClip, DEFAULT_FPS, N_MELS};
use ultraspeech_vocoder::{resample_mel_for_vocoder, BackendKind, Vocoder, VocoderConfig, VocoderError};

fn fallback(seed: u64) -> Vocoder {
    Vocoder::from_config(&VocoderConfig { seed, ..Default::default() }).unwrap()
}

fn speech_like() -> (AudioClip, MelSpectrogram) {
    let rec = generate_synthetic_corpus(21, 1, (60, 60)).unwrap().remove(0);
    let utt = preprocess_recording(&rec).unwrap();
    (utt.audio, utt.mel)
}

fn round_trip_error(seed: u64) -> f64 {
    let (_, mel) = speech_like();
    let at_vocoder_hop = resample_mel_for_vocoder(&mel, DEFAULT_FPS, 256, 22050).unwrap();
    let audio = fallback(seed).synthesize(&at_vocoder_hop).unwrap();
    let back = extract_mel(&audio, DEFAULT_FPS, mel.frames()).unwrap();
    mel.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / mel.values().len() as f64
}

#[test]
fn fallback_round_trip_keeps_log_mel() {
    let err = round_trip_error(3);
    assert!(err < 0.5, "mean abs log-mel error {err}");
}

#[test]
fn round_trip_error_is_stable_across_seeds() {
    let (a, b) = (round_trip_error(1), round_trip_error(2));
    assert!((a - b).abs() < 0.1, "{a} vs {b}");
}

#[test]
fn silence_stays_silent() {
    let mel = MelSpectrogram::new(vec![MEL_FLOOR.ln(); 30 * N_MELS], 30).unwrap();
    let audio = fallback(0).synthesize(&mel).unwrap();
    assert!(audio.rms() < 1e-3);
}

#[test]
fn loud_input_is_limited_to_full_scale() {
    let mel = MelSpectrogram::new(vec![4.0; 20 * N_MELS], 20).unwrap();
    let audio = fallback(0).synthesize(&mel).unwrap();
    assert!(audio.samples().iter().all(|s| (-1.0..=1.0).contains(s)));
    assert!(audio.samples().iter().any(|s| s.abs() > 0.99));
}

#[test]
fn output_length_tracks_frame_count() {
    let (_, mel) = speech_like();
    let m = resample_mel_for_vocoder(&mel, DEFAULT_FPS, 256, 22050).unwrap();
    let audio = fallback(0).synthesize(&m).unwrap();
    assert!((audio.len() as i64 - (m.frames() * 256) as i64).abs() <= 256);
}

#[test]
fn standardized_mel_is_rejected() {
    let (_, mel) = speech_like();
    let stats = ultraspeech_core::dsp::MelStats::from_mels([&mel]).unwrap();
    let err = fallback(0).synthesize(&mel.standardize(&stats).unwrap()).unwrap_err();
    assert!(matches!(err, VocoderError::Input(_)));
}

fn script(dir: &std::path::Path, body: &str) -> String {
    let path = dir.join("vocoder.sh");
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.to_string_lossy().into_owned()
}

fn external(cmd: String) -> Vocoder {
    Vocoder::from_config(&VocoderConfig { backend: BackendKind::External, cmd: Some(cmd), ..Default::default() }).unwrap()
}

#[test]
fn external_backend_follows_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (audio, mel) = speech_like();
    let fixture = dir.path().join("fixture.wav");
    audio.write_wav(&fixture).unwrap();
    // Succeeds only when called as `<cmd> --in <mel> --out <wav>` with a readable mel.
    let body = format!("[ \"$1\" = --in ] && [ \"$3\" = --out ] && [ -s \"$2\" ] && cp {} \"$4\"", fixture.display());
    let out = external(script(dir.path(), &body)).synthesize(&mel).unwrap();
    assert_eq!(out.len(), audio.len());
    assert_eq!(out.sample_rate(), 22050);
}

#[test]
fn missing_external_backend_is_reported() {
    let err = external("/nonexistent/vocoder".into()).synthesize(&speech_like().1).unwrap_err();
    assert!(matches!(err, VocoderError::BackendMissing(_)), "{err}");
}

#[test]
fn failing_external_backend_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = external(script(dir.path(), "echo broken >&2; exit 3")).synthesize(&speech_like().1).unwrap_err();
    assert!(matches!(err, VocoderError::BackendFailed(ref m) if m.contains("broken")), "{err}");
}
