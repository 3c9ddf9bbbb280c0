use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::mann_whitney::mann_whitney_u;
use crate::{EvalError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub speaker: String,
    pub utterance: String,
    pub mse: f64,
    pub mcd: f64,
}

/// Sentence-level scores of one system on the test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub system: String,
    pub sentences: Vec<SentenceScore>,
}

/// One table cell: a system's means on one speaker's test sentences and,
/// for non-baseline systems, p-values against the baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerCell {
    pub speaker: String,
    pub system: String,
    pub n: usize,
    pub mean_mse: f64,
    pub mean_mcd: f64,
    pub p_mse: Option<f64>,
    pub p_mcd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub baseline: String,
    pub systems: Vec<String>,
    pub speakers: Vec<String>,
    pub cells: Vec<SpeakerCell>,
    pub sentences: Vec<SystemScores>,
}

type SentenceKey = (String, String);

fn sentence_keys(s: &SystemScores) -> Result<BTreeSet<SentenceKey>> {
    let mut keys = BTreeSet::new();
    for x in &s.sentences {
        if !x.mse.is_finite() || !x.mcd.is_finite() {
            return Err(EvalError::Precondition(format!("{}: non-finite score for {}/{}", s.system, x.speaker, x.utterance)));
        }
        if !keys.insert((x.speaker.clone(), x.utterance.clone())) {
            return Err(EvalError::IncompatibleInput(format!("{}: {}/{} scored twice", s.system, x.speaker, x.utterance)));
        }
    }
    Ok(keys)
}

/// Per-speaker means of every system and Mann-Whitney p-values of each
/// system against `baseline` on the sentence-level scores of that speaker.
/// All systems must cover exactly the same sentences. Systems keep their
/// input order; speakers are sorted.
pub fn build_report(systems: &[SystemScores], baseline: &str) -> Result<EvaluationReport> {
    let base = systems.iter().find(|s| s.system == baseline).ok_or_else(|| EvalError::Precondition(format!("baseline `{baseline}` not among the systems")))?;
    let reference_keys = sentence_keys(base)?;
    if reference_keys.is_empty() {
        return Err(EvalError::Precondition("no test sentences".into()));
    }
    for s in systems {
        if sentence_keys(s)? != reference_keys {
            return Err(EvalError::IncompatibleInput(format!("`{}` was not evaluated on the same sentences as `{baseline}`", s.system)));
        }
    }
    let mut names = BTreeSet::new();
    if !systems.iter().all(|s| names.insert(s.system.as_str())) {
        return Err(EvalError::IncompatibleInput("duplicate system name".into()));
    }

    let base_groups = by_speaker(base);
    let speakers: Vec<String> = base_groups.keys().cloned().collect();
    let mut cells = Vec::new();
    for s in systems {
        let groups = by_speaker(s);
        for speaker in &speakers {
            let own = &groups[speaker];
            let mse: Vec<f64> = own.iter().map(|x| x.mse).collect();
            let mcd: Vec<f64> = own.iter().map(|x| x.mcd).collect();
            let (p_mse, p_mcd) = if s.system == baseline {
                (None, None)
            } else {
                let b = &base_groups[speaker];
                let b_mse: Vec<f64> = b.iter().map(|x| x.mse).collect();
                let b_mcd: Vec<f64> = b.iter().map(|x| x.mcd).collect();
                (Some(mann_whitney_u(&mse, &b_mse)?.p_two_sided), Some(mann_whitney_u(&mcd, &b_mcd)?.p_two_sided))
            };
            let n = own.len();
            cells.push(SpeakerCell {
                speaker: speaker.clone(),
                system: s.system.clone(),
                n,
                mean_mse: mse.iter().sum::<f64>() / n as f64,
                mean_mcd: mcd.iter().sum::<f64>() / n as f64,
                p_mse,
                p_mcd,
            });
        }
    }
    Ok(EvaluationReport { baseline: baseline.to_string(), systems: systems.iter().map(|s| s.system.clone()).collect(), speakers, cells, sentences: systems.to_vec() })
}

#[derive(Clone, Copy)]
enum Metric {
    Mse,
    Mcd,
}

impl EvaluationReport {
    pub fn cell(&self, speaker: &str, system: &str) -> Option<&SpeakerCell> {
        self.cells.iter().find(|c| c.speaker == speaker && c.system == system)
    }

    fn table(&self, title: &str, metric: Metric) -> String {
        let width = 14;
        let label = self.systems.iter().map(|s| s.len()).max().unwrap_or(0).max(16);
        let mut out = String::new();
        let rule = format!("{}\n", "-".repeat(label + (width + 3) * self.speakers.len() + 1));
        let _ = writeln!(out, "{title}");
        out.push_str(&rule);
        let _ = write!(out, "{:<label$}", "Model");
        for sp in &self.speakers {
            let _ = write!(out, " | {sp:>width$}");
        }
        out.push('\n');
        out.push_str(&rule);
        for system in &self.systems {
            let (mut means, mut ps) = (format!("{system:<label$}"), format!("{:<label$}", ""));
            let mut any_p = false;
            for sp in &self.speakers {
                let c = self.cell(sp, system).expect("every speaker has a cell for every system");
                let (mean, p) = match metric {
                    Metric::Mse => (c.mean_mse, c.p_mse),
                    Metric::Mcd => (c.mean_mcd, c.p_mcd),
                };
                let _ = write!(means, " | {mean:>width$.3}");
                match p {
                    Some(p) => {
                        any_p = true;
                        let _ = write!(ps, " | {:>width$}", format!("(p = {p:.3})"));
                    }
                    None => {
                        let _ = write!(ps, " | {:>width$}", "");
                    }
                }
            }
            out.push_str(&means);
            out.push('\n');
            if any_p {
                out.push_str(ps.trim_end());
                out.push('\n');
            }
            out.push_str(&rule);
        }
        out
    }

    /// Mean MSE per speaker and system, p-values below each proposed system.
    pub fn mse_table(&self) -> String {
        self.table("Mean squared error on the test set (standardized log-mel)", Metric::Mse)
    }

    pub fn mcd_table(&self) -> String {
        self.table("Mel-cepstral distortion on the test set (dB)", Metric::Mcd)
    }

    /// One `cell` record per table entry followed by one `sentence` record
    /// per scored sentence.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let mut v = serde_json::to_value(c).expect("serializable cell");
            v["kind"] = "cell".into();
            v["baseline"] = self.baseline.clone().into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for s in &self.sentences {
            for x in &s.sentences {
                let mut v = serde_json::to_value(x).expect("serializable sentence");
                v["kind"] = "sentence".into();
                v["system"] = s.system.clone().into();
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
        out
    }

    /// True when every mean and p-value is finite and every p is in `[0, 1]`.
    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| {
            c.mean_mse.is_finite() && c.mean_mcd.is_finite() && [c.p_mse, c.p_mcd].iter().flatten().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
        })
    }
}

fn by_speaker(s: &SystemScores) -> BTreeMap<String, Vec<&SentenceScore>> {
    let mut m: BTreeMap<String, Vec<&SentenceScore>> = BTreeMap::new();
    for x in &s.sentences {
        m.entry(x.speaker.clone()).or_default().push(x);
    }
    // Pair sentences by utterance id across systems.
    m.values_mut().for_each(|v| v.sort_by(|a, b| a.utterance.cmp(&b.utterance)));
    m
}
