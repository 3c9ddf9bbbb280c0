use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ultraspeech_evaluation::{mushra_stats, MushraRating, MushraStats};

use crate::experiment::{condition_label, Experiment, Manifest};
use crate::store::{Event, RecordLog};
use crate::{MushraError, Result};

/// Audio slot name of the labeled reference in a trial.
pub const REFERENCE_SLOT: &str = "reference";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub experiment_id: String,
    /// Free-form listener metadata, stored as given.
    pub listener: serde_json::Value,
    pub seed: u64,
}

/// Scores for one trial, keyed by the opaque labels the listener saw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub trial_index: usize,
    pub scores: BTreeMap<String, u8>,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingAck {
    pub session_id: String,
    pub trial_index: usize,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioSlot {
    pub label: String,
    pub url: String,
}

/// What the listener's client receives: no utterance or condition names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub session_id: String,
    pub trial_index: usize,
    pub trials_total: usize,
    pub reference_url: String,
    pub conditions: Vec<AudioSlot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTrial {
    Open { trial: TrialPayload },
    Completed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub experiment_id: String,
    pub trials: usize,
    pub served: usize,
    pub rated: usize,
    pub completed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerPanel {
    pub speaker: String,
    pub stats: MushraStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MushraReport {
    pub experiment_id: String,
    pub ratings: usize,
    pub listeners: usize,
    pub overall: MushraStats,
    pub speakers: Vec<SpeakerPanel>,
}

/// Utterance index and the condition behind each label slot.
#[derive(Clone, Debug)]
struct TrialPlan {
    utterance: usize,
    conditions: Vec<String>,
}

#[derive(Debug)]
struct SessionState {
    record: SessionRecord,
    plan: Vec<TrialPlan>,
    served: usize,
    ratings: BTreeMap<usize, RatingRecord>,
}

impl SessionState {
    fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.record.session_id.clone(),
            experiment_id: self.record.experiment_id.clone(),
            trials: self.plan.len(),
            served: self.served,
            rated: self.ratings.len(),
            completed: self.ratings.len() == self.plan.len(),
        }
    }
}

fn plan_session(exp: &Experiment, seed: u64) -> Vec<TrialPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..exp.utterances.len()).collect();
    order.shuffle(&mut rng);
    order
        .into_iter()
        .map(|utterance| {
            let mut conditions = exp.systems.clone();
            conditions.shuffle(&mut rng);
            TrialPlan { utterance, conditions }
        })
        .collect()
}

fn default_session_seed(experiment_seed: u64, n: usize) -> u64 {
    experiment_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (n as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn audio_url(session: &str, trial: usize, slot: &str) -> String {
    format!("/audio/{session}/{trial}/{slot}")
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Experiments, sessions and ratings backed by an append-only record log.
///
/// Every mutation is first appended to the log and then applied to the
/// in-memory state, so reopening the same directory restores exactly the
/// acknowledged state.
#[derive(Debug)]
pub struct MushraService {
    log: RecordLog,
    experiments: BTreeMap<String, Experiment>,
    sessions: BTreeMap<String, SessionState>,
}

impl MushraService {
    pub fn open(data_dir: &Path) -> Result<Self> {
        let (log, events) = RecordLog::open(data_dir)?;
        let mut svc = Self { log, experiments: BTreeMap::new(), sessions: BTreeMap::new() };
        let n = events.len();
        for event in events {
            svc.apply(event)?;
        }
        log::info!("replayed {n} records from {}", svc.log.path().display());
        Ok(svc)
    }

    fn apply(&mut self, event: Event) -> Result<()> {
        let broken = |m: String| MushraError::Log { path: self.log.path().to_path_buf(), message: m };
        match event {
            Event::Experiment(e) => {
                self.experiments.insert(e.id.clone(), e);
            }
            Event::Session(record) => {
                let exp = self.experiments.get(&record.experiment_id).ok_or_else(|| broken(format!("session {} before its experiment", record.session_id)))?;
                let plan = plan_session(exp, record.seed);
                self.sessions.insert(record.session_id.clone(), SessionState { record, plan, served: 0, ratings: BTreeMap::new() });
            }
            Event::Served { session_id, trial_index } => {
                let s = self.sessions.get_mut(&session_id).ok_or_else(|| broken(format!("trial served for unknown session {session_id}")))?;
                s.served = s.served.max(trial_index + 1);
            }
            Event::Rating(r) => {
                let s = self.sessions.get_mut(&r.session_id).ok_or_else(|| broken(format!("rating for unknown session {}", r.session_id)))?;
                s.ratings.insert(r.trial_index, r);
            }
        }
        Ok(())
    }

    fn commit(&mut self, event: Event) -> Result<()> {
        self.log.append(&event)?;
        self.apply(event)
    }

    /// Validates the manifest and stores the experiment. Submitting the
    /// same manifest again returns the stored experiment unchanged.
    pub fn create_experiment(&mut self, manifest: Manifest) -> Result<Experiment> {
        let exp = Experiment::from_manifest(manifest)?;
        if let Some(existing) = self.experiments.get(&exp.id) {
            return Ok(existing.clone());
        }
        self.commit(Event::Experiment(exp.clone()))?;
        Ok(exp)
    }

    pub fn experiment(&self, id: &str) -> Result<&Experiment> {
        self.experiments.get(id).ok_or_else(|| MushraError::NotFound(format!("experiment {id}")))
    }

    /// Opens session `{experiment}-s{n}` for one listener. Without an
    /// explicit seed the orders derive from the experiment seed and `n`.
    pub fn create_session(&mut self, experiment_id: &str, listener: serde_json::Value, seed: Option<u64>) -> Result<SessionInfo> {
        let exp = self.experiment(experiment_id)?;
        let n = self.sessions.values().filter(|s| s.record.experiment_id == experiment_id).count() + 1;
        let seed = seed.unwrap_or_else(|| default_session_seed(exp.seed, n));
        let session_id = format!("{experiment_id}-s{n}");
        self.commit(Event::Session(SessionRecord { session_id: session_id.clone(), experiment_id: experiment_id.into(), listener, seed }))?;
        Ok(self.sessions[&session_id].info())
    }

    fn session(&self, id: &str) -> Result<&SessionState> {
        self.sessions.get(id).ok_or_else(|| MushraError::NotFound(format!("session {id}")))
    }

    pub fn session_info(&self, id: &str) -> Result<SessionInfo> {
        Ok(self.session(id)?.info())
    }

    pub fn session_record(&self, id: &str) -> Result<&SessionRecord> {
        Ok(&self.session(id)?.record)
    }

    fn payload(s: &SessionState, trial: usize) -> TrialPayload {
        let id = &s.record.session_id;
        TrialPayload {
            session_id: id.clone(),
            trial_index: trial,
            trials_total: s.plan.len(),
            reference_url: audio_url(id, trial, REFERENCE_SLOT),
            conditions: (0..s.plan[trial].conditions.len())
                .map(|i| {
                    let label = condition_label(i);
                    AudioSlot { url: audio_url(id, trial, &label), label }
                })
                .collect(),
        }
    }

    /// The trial the listener should rate now. A served trial that has not
    /// been rated yet is served again, so a reloaded client resumes where
    /// it left off; otherwise the next trial of the session's order is
    /// served. Once every trial is rated the session is completed.
    pub fn next_trial(&mut self, session_id: &str) -> Result<NextTrial> {
        let s = self.session(session_id)?;
        if s.served > 0 && !s.ratings.contains_key(&(s.served - 1)) {
            return Ok(NextTrial::Open { trial: Self::payload(s, s.served - 1) });
        }
        if s.served == s.plan.len() {
            return Ok(NextTrial::Completed);
        }
        let trial_index = s.served;
        self.commit(Event::Served { session_id: session_id.into(), trial_index })?;
        Ok(NextTrial::Open { trial: Self::payload(&self.sessions[session_id], trial_index) })
    }

    /// Records the listener's scores for a served trial. Resubmitting the
    /// identical scores returns the original acknowledgement without
    /// storing anything.
    pub fn submit_ratings(&mut self, session_id: &str, trial_index: usize, scores: &BTreeMap<String, i64>) -> Result<RatingAck> {
        let s = self.session(session_id)?;
        if trial_index >= s.served {
            return Err(MushraError::NotFound(format!("trial {trial_index} has not been served in session {session_id}")));
        }
        let n_slots = s.plan[trial_index].conditions.len();
        let mut validated = BTreeMap::new();
        for i in 0..n_slots {
            let label = condition_label(i);
            let score = *scores.get(&label).ok_or_else(|| MushraError::Validation(format!("missing score for condition {label}")))?;
            if !(0..=100).contains(&score) {
                return Err(MushraError::Validation(format!("score {score} for condition {label} is outside [0, 100]")));
            }
            validated.insert(label, score as u8);
        }
        if let Some(extra) = scores.keys().find(|k| !validated.contains_key(*k)) {
            return Err(MushraError::Validation(format!("unknown condition label {extra}")));
        }
        if let Some(prev) = s.ratings.get(&trial_index) {
            if prev.scores == validated {
                return Ok(RatingAck { session_id: session_id.into(), trial_index, timestamp_ms: prev.timestamp_ms });
            }
            return Err(MushraError::Conflict(format!("trial {trial_index} of session {session_id} was already rated differently")));
        }
        let record = RatingRecord { session_id: session_id.into(), trial_index, scores: validated, timestamp_ms: now_ms() };
        let ack = RatingAck { session_id: session_id.into(), trial_index, timestamp_ms: record.timestamp_ms };
        self.commit(Event::Rating(record))?;
        Ok(ack)
    }

    pub fn rating(&self, session_id: &str, trial_index: usize) -> Result<&RatingRecord> {
        self.session(session_id)?
            .ratings
            .get(&trial_index)
            .ok_or_else(|| MushraError::NotFound(format!("no rating for trial {trial_index} of session {session_id}")))
    }

    /// File behind an audio slot of a served trial.
    pub fn audio_path(&self, session_id: &str, trial_index: usize, slot: &str) -> Result<PathBuf> {
        let s = self.session(session_id)?;
        let missing = || MushraError::NotFound(format!("audio {slot} of trial {trial_index} in session {session_id}"));
        if trial_index >= s.served {
            return Err(missing());
        }
        let plan = &s.plan[trial_index];
        let set = &self.experiments[&s.record.experiment_id].utterances[plan.utterance];
        if slot == REFERENCE_SLOT {
            return Ok(set.reference.clone());
        }
        let i = (0..plan.conditions.len()).find(|&i| condition_label(i) == slot).ok_or_else(missing)?;
        Ok(set.conditions[&plan.conditions[i]].clone())
    }

    /// Every stored score of the experiment with its condition restored.
    /// The listener is identified by session id. Also returns the speaker
    /// of each rating.
    pub fn deanonymized_ratings(&self, experiment_id: &str) -> Result<Vec<(String, MushraRating)>> {
        let exp = self.experiment(experiment_id)?;
        let mut out = Vec::new();
        for s in self.sessions.values().filter(|s| s.record.experiment_id == experiment_id) {
            for (trial, record) in &s.ratings {
                let plan = &s.plan[*trial];
                let set = &exp.utterances[plan.utterance];
                for (i, condition) in plan.conditions.iter().enumerate() {
                    let score = record.scores[&condition_label(i)];
                    out.push((
                        set.speaker.clone(),
                        MushraRating {
                            listener: s.record.session_id.clone(),
                            utterance: format!("{}/{}", set.speaker, set.utterance),
                            system: condition.clone(),
                            score: score as f64,
                        },
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Statistics over every acknowledged rating: one overall panel and one
    /// panel per speaker.
    pub fn report(&self, experiment_id: &str) -> Result<MushraReport> {
        let rated = self.deanonymized_ratings(experiment_id)?;
        if rated.is_empty() {
            return Err(MushraError::EmptyReport(experiment_id.into()));
        }
        let mut by_speaker: BTreeMap<&str, Vec<MushraRating>> = BTreeMap::new();
        for (speaker, r) in &rated {
            by_speaker.entry(speaker).or_default().push(r.clone());
        }
        let all: Vec<MushraRating> = rated.iter().map(|(_, r)| r.clone()).collect();
        let listeners = all.iter().map(|r| r.listener.as_str()).collect::<std::collections::BTreeSet<_>>().len();
        let speakers = by_speaker
            .into_iter()
            .map(|(speaker, ratings)| Ok(SpeakerPanel { speaker: speaker.into(), stats: mushra_stats(&ratings)? }))
            .collect::<Result<_>>()?;
        Ok(MushraReport { experiment_id: experiment_id.into(), ratings: all.len(), listeners, overall: mushra_stats(&all)?, speakers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seeds_differ_per_session() {
        let seeds: std::collections::BTreeSet<u64> = (1..50).map(|n| default_session_seed(7, n)).collect();
        assert_eq!(seeds.len(), 49);
    }

    #[test]
    fn plans_are_permutations() {
        let exp = Experiment {
            id: "e".into(),
            systems: ["anchor", "hidden_reference", "x", "y"].map(String::from).to_vec(),
            utterances: (0..6)
                .map(|i| crate::StimulusSet { speaker: "s".into(), utterance: i.to_string(), reference: "r".into(), conditions: BTreeMap::new() })
                .collect(),
            seed: 0,
        };
        let plan = plan_session(&exp, 3);
        let mut utts: Vec<usize> = plan.iter().map(|t| t.utterance).collect();
        utts.sort();
        assert_eq!(utts, (0..6).collect::<Vec<_>>());
        for t in &plan {
            let mut c = t.conditions.clone();
            c.sort();
            assert_eq!(c, exp.systems);
        }
    }
}
