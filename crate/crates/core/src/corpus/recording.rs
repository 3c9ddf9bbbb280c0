use std::path::{Path, PathBuf};

use super::split::UtteranceRef;
use crate::{AudioClip, CoreError, Result, RAW_SAMPLES_PER_LINE, SCANLINES};

/// Duration disagreement between the two streams that triggers a warning.
pub const ALIGNMENT_TOLERANCE_SECS: f64 = 0.5;

/// Contents of a `.param` sidecar.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordingParams {
    pub fps: f64,
    pub scanlines: usize,
    pub samples_per_line: usize,
    /// Audio time of the first ultrasound frame, in seconds.
    pub time_offset: f64,
}

impl RecordingParams {
    pub fn new(fps: f64) -> Self {
        Self { fps, scanlines: SCANLINES, samples_per_line: RAW_SAMPLES_PER_LINE, time_offset: 0.0 }
    }

    /// Parses `key: value` or `key=value` lines. Blank lines and `#`
    /// comments are ignored; TaL80 key names are accepted as aliases.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut fps, mut scanlines, mut samples, mut offset) = (None, None, None, 0.0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .or_else(|| line.split_once('='))
                .ok_or_else(|| CoreError::Config(format!("line {}: expected `key: value`", lineno + 1)))?;
            let value = value.trim();
            let bad = |what: &str| CoreError::Config(format!("line {}: invalid {what} `{value}`", lineno + 1));
            match key.trim() {
                "fps" | "FramesPerSec" => fps = Some(value.parse::<f64>().map_err(|_| bad("fps"))?),
                "scanlines" | "NumVectors" => scanlines = Some(value.parse::<usize>().map_err(|_| bad("scanline count"))?),
                "samples_per_line" | "PixPerVector" => samples = Some(value.parse::<usize>().map_err(|_| bad("samples per line"))?),
                "time_offset" | "TimeInSecsOfFirstFrame" => offset = value.parse::<f64>().map_err(|_| bad("time offset"))?,
                _ => {}
            }
        }
        let fps = fps.ok_or_else(|| CoreError::Config("missing `fps`".into()))?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(CoreError::Config(format!("fps must be positive, got {fps}")));
        }
        let params = Self {
            fps,
            scanlines: scanlines.ok_or_else(|| CoreError::Config("missing `scanlines`".into()))?,
            samples_per_line: samples.ok_or_else(|| CoreError::Config("missing `samples_per_line`".into()))?,
            time_offset: offset,
        };
        if params.scanlines != SCANLINES || params.samples_per_line != RAW_SAMPLES_PER_LINE {
            return Err(CoreError::Config(format!(
                "frame geometry {}x{} is not the supported {SCANLINES}x{RAW_SAMPLES_PER_LINE}",
                params.scanlines, params.samples_per_line
            )));
        }
        Ok(params)
    }

    pub fn to_text(&self) -> String {
        format!(
            "fps: {}\nscanlines: {}\nsamples_per_line: {}\ntime_offset: {}\n",
            self.fps, self.scanlines, self.samples_per_line, self.time_offset
        )
    }

    pub fn frame_bytes(&self) -> usize {
        self.scanlines * self.samples_per_line
    }
}

/// One utterance: raw `T × 64 × 842` scanline frames plus the audio
/// recorded alongside them.
#[derive(Clone, Debug, PartialEq)]
pub struct UltrasoundRecording {
    pub speaker_id: String,
    pub utterance_id: String,
    frames: Vec<u8>,
    n_frames: usize,
    fps: f64,
    audio: AudioClip,
    warnings: Vec<String>,
}

impl UltrasoundRecording {
    pub fn new(speaker_id: impl Into<String>, utterance_id: impl Into<String>, frames: Vec<u8>, fps: f64, audio: AudioClip) -> Result<Self> {
        let frame_bytes = SCANLINES * RAW_SAMPLES_PER_LINE;
        if frames.is_empty() || frames.len() % frame_bytes != 0 {
            return Err(CoreError::Shape(format!("{} bytes is not a positive multiple of {frame_bytes}", frames.len())));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(CoreError::Precondition(format!("fps must be positive, got {fps}")));
        }
        Ok(Self {
            speaker_id: speaker_id.into(),
            utterance_id: utterance_id.into(),
            n_frames: frames.len() / frame_bytes,
            frames,
            fps,
            audio,
            warnings: Vec::new(),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// All frames, frame-major then scanline-major.
    pub fn frames(&self) -> &[u8] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let n = SCANLINES * RAW_SAMPLES_PER_LINE;
        &self.frames[t * n..(t + 1) * n]
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn audio(&self) -> &AudioClip {
        &self.audio
    }

    /// Alignment diagnostics collected while loading.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn utterance_ref(&self) -> UtteranceRef {
        UtteranceRef::new(&self.speaker_id, &self.utterance_id)
    }

    pub fn params(&self) -> RecordingParams {
        RecordingParams::new(self.fps)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CoreError::io(path, e))
}

/// Loads one utterance. The speaker id is the name of the directory holding
/// the ultrasound file; the utterance id is its file stem.
///
/// Audio is peak-normalized, shifted by the sidecar's time offset and the
/// longer of the two streams is truncated to their common duration.
pub fn load_recording(ultrasound_path: &Path, audio_path: &Path, params_path: &Path) -> Result<UltrasoundRecording> {
    let params_text = match std::fs::read_to_string(params_path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CoreError::Config(format!("missing parameter file {}", params_path.display())))
        }
        Err(e) => return Err(CoreError::io(params_path, e)),
    };
    let params = RecordingParams::parse(&params_text)?;
    let mut frames = read_bytes(ultrasound_path)?;
    let frame_bytes = params.frame_bytes();
    if frames.is_empty() || frames.len() % frame_bytes != 0 {
        return Err(CoreError::malformed(ultrasound_path, format!("{} bytes is not a positive multiple of {frame_bytes}", frames.len())));
    }
    let audio = AudioClip::read_wav(audio_path)?;
    let rate = audio.sample_rate() as f64;
    let mut warnings = Vec::new();

    let mut samples = audio.into_samples();
    if params.time_offset > 0.0 {
        let skip = ((params.time_offset * rate).round() as usize).min(samples.len());
        samples.drain(..skip);
    }
    let n_frames = frames.len() / frame_bytes;
    let us_secs = n_frames as f64 / params.fps;
    let audio_secs = samples.len() as f64 / rate;
    if (us_secs - audio_secs).abs() > ALIGNMENT_TOLERANCE_SECS {
        warnings.push(format!("ultrasound lasts {us_secs:.3} s but audio lasts {audio_secs:.3} s; truncated to the shorter"));
    }
    // Half a sample of slack so that audio of `round(T · rate / fps)` samples keeps all T frames.
    let covered = ((samples.len() as f64 + 0.5) * params.fps / rate).floor() as usize;
    let kept_frames = covered.clamp(1, n_frames);
    if kept_frames < n_frames {
        frames.truncate(kept_frames * frame_bytes);
    }
    let kept_samples = ((kept_frames as f64 * rate / params.fps).round() as usize).min(samples.len());
    samples.truncate(kept_samples);
    if samples.is_empty() {
        return Err(CoreError::malformed(audio_path, "no audio overlaps the ultrasound frames"));
    }
    for w in &warnings {
        log::warn!("{}: {w}", ultrasound_path.display());
    }

    let speaker = ultrasound_path.parent().and_then(|p| p.file_name()).map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let utterance = ultrasound_path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let audio = AudioClip::new(samples, rate as u32)?;
    let mut rec = UltrasoundRecording::new(speaker, utterance, frames, params.fps, audio)?;
    rec.warnings = warnings;
    Ok(rec)
}

fn paths_for(dir: &Path, utterance: &str) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join(format!("{utterance}.ult")), dir.join(format!("{utterance}.wav")), dir.join(format!("{utterance}.param")))
}

/// Writes `<utt>.ult`, `<utt>.wav` (16-bit PCM) and `<utt>.param` into `dir`.
pub fn store_recording(dir: &Path, rec: &UltrasoundRecording) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let (ult, wav, param) = paths_for(dir, &rec.utterance_id);
    std::fs::write(&ult, rec.frames()).map_err(|e| CoreError::io(&ult, e))?;
    std::fs::write(&param, rec.params().to_text()).map_err(|e| CoreError::io(&param, e))?;
    rec.audio().write_wav(&wav)
}

/// Loads every `<utt>.ult` in a speaker directory, ordered by utterance id.
pub fn load_speaker(dir: &Path) -> Result<Vec<UltrasoundRecording>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CoreError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "ult") {
            if let Some(stem) = path.file_stem() {
                stems.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    stems.sort();
    stems
        .iter()
        .map(|stem| {
            let (ult, wav, param) = paths_for(dir, stem);
            load_recording(&ult, &wav, &param)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAME: usize = SCANLINES * RAW_SAMPLES_PER_LINE;

    fn write_fixture(dir: &Path, name: &str, frames: &[u8], fps: f64, audio_secs: f64, extra_params: &str) -> (PathBuf, PathBuf, PathBuf) {
        let (ult, wav, param) = paths_for(dir, name);
        std::fs::write(&ult, frames).unwrap();
        std::fs::write(&param, format!("fps: {fps}\nscanlines: 64\nsamples_per_line: 842\n{extra_params}")).unwrap();
        let n = (audio_secs * 22050.0) as usize;
        let samples = (0..n).map(|i| 0.25 * ((i as f32) * 0.05).sin()).collect();
        AudioClip::new(samples, 22050).unwrap().write_wav(&wav).unwrap();
        (ult, wav, param)
    }

    #[test]
    fn constant_payload_loads() {
        let dir = tempfile::tempdir().unwrap();
        let spk = dir.path().join("01fi");
        std::fs::create_dir(&spk).unwrap();
        let (ult, wav, param) = write_fixture(&spk, "005_xaud", &vec![128u8; 2 * FRAME], 81.5, 2.0 / 81.5, "");
        let rec = load_recording(&ult, &wav, &param).unwrap();
        assert_eq!(rec.n_frames(), 2);
        assert!(rec.frames().iter().all(|&p| p == 128));
        assert_eq!((rec.speaker_id.as_str(), rec.utterance_id.as_str()), ("01fi", "005_xaud"));
        // Peak normalization.
        let peak = rec.audio().samples().iter().fold(0.0f32, |m, s| m.max(s.abs()));
        assert!((peak - 1.0).abs() < 1e-6);
        assert!(rec.warnings().is_empty());
    }

    #[test]
    fn indivisible_payload_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let (ult, wav, param) = write_fixture(dir.path(), "x", &vec![0u8; FRAME + 1], 81.5, 0.1, "");
        assert!(matches!(load_recording(&ult, &wav, &param), Err(CoreError::MalformedFile { .. })));
    }

    #[test]
    fn missing_params_is_a_configuration_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ult, wav, param) = write_fixture(dir.path(), "x", &vec![0u8; FRAME], 81.5, 0.1, "");
        std::fs::remove_file(&param).unwrap();
        assert!(matches!(load_recording(&ult, &wav, &param), Err(CoreError::Config(_))));
    }

    #[test]
    fn longer_audio_is_truncated_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let (ult, wav, param) = write_fixture(dir.path(), "x", &vec![1u8; 10 * FRAME], 81.5, 1.5, "");
        let rec = load_recording(&ult, &wav, &param).unwrap();
        assert_eq!(rec.n_frames(), 10);
        assert_eq!(rec.audio().len(), (10.0 * 22050.0 / 81.5f64).round() as usize);
        assert_eq!(rec.warnings().len(), 1);
    }

    #[test]
    fn shorter_audio_drops_frames() {
        let dir = tempfile::tempdir().unwrap();
        let (ult, wav, param) = write_fixture(dir.path(), "x", &vec![1u8; 20 * FRAME], 81.5, 0.1, "");
        let rec = load_recording(&ult, &wav, &param).unwrap();
        assert_eq!(rec.n_frames(), 8);
        assert!(rec.warnings().is_empty());
    }

    #[test]
    fn tal_style_keys_are_accepted() {
        let p = RecordingParams::parse("NumVectors=64\nPixPerVector=842\nFramesPerSec=81.5\nTimeInSecsOfFirstFrame=0.25\nZeroOffset=50\n").unwrap();
        assert_eq!(p.fps, 81.5);
        assert_eq!(p.time_offset, 0.25);
        assert!(matches!(RecordingParams::parse("scanlines: 64\nsamples_per_line: 842"), Err(CoreError::Config(_))));
        assert!(matches!(RecordingParams::parse("fps: 81.5\nscanlines: 63\nsamples_per_line: 842"), Err(CoreError::Config(_))));
    }

    #[test]
    fn store_then_load_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<u8> = (0..3 * FRAME).map(|i| (i * 31 % 256) as u8).collect();
        let audio = AudioClip::new(vec![0.5; (3.0 * 22050.0 / 81.5f64).round() as usize], 22050).unwrap();
        let rec = UltrasoundRecording::new("spk", "007_xaud", frames, 81.5, audio).unwrap();
        let spk = dir.path().join("spk");
        store_recording(&spk, &rec).unwrap();
        let back = load_speaker(&spk).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].frames(), rec.frames());
        assert_eq!(back[0].utterance_id, "007_xaud");
    }
}
