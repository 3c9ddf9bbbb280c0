use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ultraspeech_core::AudioClip;

use crate::{MushraError, Result};

/// Condition name of the unlabeled copy of the reference.
pub const HIDDEN_REFERENCE: &str = "hidden_reference";
/// Condition name of the noise-degraded lower anchor.
pub const ANCHOR: &str = "anchor";

/// Audio for one utterance: the labeled reference and one file per condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub speaker: String,
    pub utterance: String,
    pub reference: PathBuf,
    pub conditions: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub systems: Vec<String>,
    pub utterances: Vec<StimulusSet>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    pub systems: Vec<String>,
    pub utterances: Vec<StimulusSet>,
    pub seed: u64,
}

impl Experiment {
    /// Validates `manifest` and derives the experiment id from its content.
    ///
    /// Every utterance must provide decodable audio for exactly the listed
    /// conditions, which must include [`HIDDEN_REFERENCE`], [`ANCHOR`] and
    /// at least one more.
    pub fn from_manifest(manifest: Manifest) -> Result<Self> {
        let bad = |m: String| Err(MushraError::Manifest(m));
        let systems: BTreeSet<&str> = manifest.systems.iter().map(String::as_str).collect();
        if systems.len() != manifest.systems.len() {
            return bad("duplicate condition name".into());
        }
        for required in [HIDDEN_REFERENCE, ANCHOR] {
            if !systems.contains(required) {
                return bad(format!("conditions must include `{required}`"));
            }
        }
        if systems.len() < 3 {
            return bad(format!("need at least two conditions besides the hidden reference, got {:?}", manifest.systems));
        }
        if manifest.utterances.is_empty() {
            return bad("no utterances".into());
        }
        let mut seen = BTreeSet::new();
        for set in &manifest.utterances {
            if !seen.insert((&set.speaker, &set.utterance)) {
                return bad(format!("utterance {}/{} listed twice", set.speaker, set.utterance));
            }
            if let Some(missing) = systems.iter().find(|c| !set.conditions.contains_key(**c)) {
                return bad(format!("utterance {}/{} has no audio for condition `{missing}`", set.speaker, set.utterance));
            }
            if let Some(extra) = set.conditions.keys().find(|c| !systems.contains(c.as_str())) {
                return bad(format!("utterance {}/{} lists unknown condition `{extra}`", set.speaker, set.utterance));
            }
            for path in std::iter::once(&set.reference).chain(set.conditions.values()) {
                if let Err(e) = AudioClip::read_wav_raw(path) {
                    return bad(format!("utterance {}/{}: {e}", set.speaker, set.utterance));
                }
            }
        }
        let id = experiment_id(&manifest);
        Ok(Self { id, systems: manifest.systems, utterances: manifest.utterances, seed: manifest.seed })
    }
}

/// First 16 hex digits of the SHA-256 of the manifest's JSON form.
fn experiment_id(manifest: &Manifest) -> String {
    let json = serde_json::to_vec(manifest).expect("manifest serializes");
    let digest = Sha256::digest(&json);
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("exp-{hex}")
}

/// Opaque label shown to listeners for the `i`-th slot of a trial:
/// `A`..`Z`, then `AA`, `AB`, ...
pub fn condition_label(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}
