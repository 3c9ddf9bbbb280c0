use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::recording::UltrasoundRecording;
use crate::{CoreError, Result};

/// The shared sentences every speaker reads; always held out for testing.
pub const TEST_UTTERANCES: [&str; 10] =
    ["005_xaud", "006_xaud", "007_xaud", "008_xaud", "009_xaud", "010_xaud", "011_xaud", "012_xaud", "013_xaud", "014_xaud"];

/// Fewest non-test utterances that still leave a usable train/dev split.
pub const MIN_NON_TEST: usize = 12;

pub fn is_test_utterance(utterance: &str) -> bool {
    TEST_UTTERANCES.contains(&utterance)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UtteranceRef {
    pub speaker: String,
    pub utterance: String,
}

impl UtteranceRef {
    pub fn new(speaker: &str, utterance: &str) -> Self {
        Self { speaker: speaker.to_string(), utterance: utterance.to_string() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Dev,
    Test,
}

/// One line of the split manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub speaker: String,
    pub utterance: String,
    pub split: SplitRole,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<UtteranceRef>,
    pub dev: Vec<UtteranceRef>,
    pub test: Vec<UtteranceRef>,
}

impl CorpusSplit {
    pub fn role_of(&self, utt: &UtteranceRef) -> Option<SplitRole> {
        if self.train.contains(utt) {
            Some(SplitRole::Train)
        } else if self.dev.contains(utt) {
            Some(SplitRole::Dev)
        } else if self.test.contains(utt) {
            Some(SplitRole::Test)
        } else {
            None
        }
    }

    pub fn records(&self) -> Vec<SplitRecord> {
        let tag = |list: &[UtteranceRef], split| {
            list.iter().map(move |u| SplitRecord { speaker: u.speaker.clone(), utterance: u.utterance.clone(), split }).collect::<Vec<_>>()
        };
        let mut out = tag(&self.train, SplitRole::Train);
        out.extend(tag(&self.dev, SplitRole::Dev));
        out.extend(tag(&self.test, SplitRole::Test));
        out
    }

    pub fn from_records(records: impl IntoIterator<Item = SplitRecord>) -> Self {
        let mut split = Self::default();
        for r in records {
            let u = UtteranceRef { speaker: r.speaker, utterance: r.utterance };
            match r.split {
                SplitRole::Train => split.train.push(u),
                SplitRole::Dev => split.dev.push(u),
                SplitRole::Test => split.test.push(u),
            }
        }
        split
    }
}

/// Test sentences go to `test`; the rest is sorted, shuffled with `seed`
/// and divided 9:1 into train and dev (dev gets `round(n / 10)`, at least one).
pub fn split_utterances(utterances: &[UtteranceRef], seed: u64) -> Result<CorpusSplit> {
    let speakers: BTreeSet<&str> = utterances.iter().map(|u| u.speaker.as_str()).collect();
    if speakers.len() > 1 {
        return Err(CoreError::Precondition(format!("split expects one speaker, got {}", speakers.len())));
    }
    let unique: BTreeSet<&UtteranceRef> = utterances.iter().collect();
    if unique.len() != utterances.len() {
        return Err(CoreError::Precondition("duplicate utterance in split input".into()));
    }
    let (test, mut rest): (Vec<UtteranceRef>, Vec<UtteranceRef>) =
        unique.into_iter().cloned().partition(|u| is_test_utterance(&u.utterance));
    if rest.len() < MIN_NON_TEST {
        return Err(CoreError::InsufficientData(format!("{} non-test utterances, need at least {MIN_NON_TEST}", rest.len())));
    }
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((rest.len() as f64 / 10.0).round() as usize).max(1);
    let train = rest.split_off(n_dev);
    Ok(CorpusSplit { train, dev: rest, test })
}

pub fn split_corpus(recordings: &[UltrasoundRecording], seed: u64) -> Result<CorpusSplit> {
    let refs: Vec<UtteranceRef> = recordings.iter().map(UltrasoundRecording::utterance_ref).collect();
    split_utterances(&refs, seed)
}

/// Writes one JSON object per line: `{speaker, utterance, split}`.
pub fn write_split_manifest(path: &Path, split: &CorpusSplit) -> Result<()> {
    let mut out = Vec::new();
    for record in split.records() {
        serde_json::to_writer(&mut out, &record).expect("split records serialize");
        out.push(b'\n');
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(|e| CoreError::io(path, e))
}

pub fn read_split_manifest(path: &Path) -> Result<CorpusSplit> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| CoreError::malformed(path, format!("line {}: {e}", i + 1))))
        .collect::<Result<Vec<SplitRecord>>>()?;
    Ok(CorpusSplit::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn refs(n: usize) -> Vec<UtteranceRef> {
        (1..=n).map(|i| UtteranceRef::new("01fi", &format!("{i:03}_xaud"))).collect()
    }

    #[test]
    fn full_speaker_split_sizes() {
        let split = split_utterances(&refs(204), 0).unwrap();
        assert_eq!(split.test.len(), 10);
        assert!(split.dev.len() == 19 || split.dev.len() == 20);
        assert_eq!(split.train.len(), 204 - 10 - split.dev.len());
        assert!(split.test.iter().all(|u| is_test_utterance(&u.utterance)));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = split_utterances(&refs(60), 9).unwrap();
        let mut reversed = refs(60);
        reversed.reverse();
        assert_eq!(a, split_utterances(&reversed, 9).unwrap());
        assert_ne!(a.dev, split_utterances(&refs(60), 10).unwrap().dev);
    }

    #[test]
    fn threshold_boundary() {
        // 21 utterances leave 11 outside the test set.
        assert!(matches!(split_utterances(&refs(21), 0), Err(CoreError::InsufficientData(_))));
        let split = split_utterances(&refs(22), 0).unwrap();
        assert_eq!((split.train.len(), split.dev.len()), (11, 1));
    }

    #[test]
    fn rejects_mixed_speakers() {
        let mut input = refs(30);
        input.push(UtteranceRef::new("02fe", "100_xaud"));
        assert!(matches!(split_utterances(&input, 0), Err(CoreError::Precondition(_))));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.jsonl");
        let split = split_utterances(&refs(40), 3).unwrap();
        write_split_manifest(&path, &split).unwrap();
        let first = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert!(first.contains("\"split\":\"train\""));
        assert_eq!(read_split_manifest(&path).unwrap(), split);
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_complete(n in 22usize..120, seed in any::<u64>()) {
            let input = refs(n);
            let split = split_utterances(&input, seed).unwrap();
            let all: BTreeSet<_> = split.train.iter().chain(&split.dev).chain(&split.test).collect();
            prop_assert_eq!(all.len(), split.train.len() + split.dev.len() + split.test.len());
            prop_assert_eq!(all, input.iter().collect::<BTreeSet<_>>());
        }
    }
}
