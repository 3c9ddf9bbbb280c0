use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use serde_json::Value;
use ultraspeech_cli::{Cli, RunManifest, REPORT_JSON, REPORT_TABLES};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ultraspeech"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic corpus of 24 short utterances, preprocessed.
fn prepared(root: &Path) -> PathBuf {
    let raw = root.join("raw");
    let prep = root.join("prep");
    ok(&["generate-corpus", "--out", p(&raw), "--seed", "3", "--utterances", "24", "--min-frames", "6", "--max-frames", "9"]);
    ok(&["preprocess", "--data-dir", p(&raw), "--out", p(&prep), "--seed", "1"]);
    prep
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--speaker", "s", "--model", "transformer", "--data", "d", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(&["mushra", "prepare", "--reference", "r", "--systems", "nodir", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["preprocess", "--data-dir", p(&dir.path().join("missing")), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "train.batchsize: 4\n").unwrap();
    let out = run(&["--config", p(&cfg), "generate-corpus", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn help_documents_every_flag_of_every_subcommand() {
    fn walk(cmd: &clap::Command, path: &str, seen: &mut usize) {
        for arg in cmd.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            assert!(arg.get_help().is_some_and(|h| !h.to_string().is_empty()) || arg.get_possible_values().iter().all(|v| v.get_help().is_some()), "{path} --{id} has no help");
        }
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{path} {} has no description", sub.get_name());
            *seen += 1;
            walk(sub, &format!("{path} {}", sub.get_name()), seen);
        }
    }
    let mut seen = 0;
    walk(&Cli::command(), "ultraspeech", &mut seen);
    assert_eq!(seen, 8);
    for sub in [vec!["train"], vec!["synthesize"], vec!["evaluate"], vec!["mushra", "prepare"], vec!["mushra", "serve"]] {
        let mut args = sub.clone();
        args.push("--help");
        let out = ok(&args);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out") || text.contains("--data"), "{sub:?}: {text}");
    }
}

#[test]
fn generated_corpus_is_reproducible_and_manifested() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["generate-corpus", "--out", p(d.path()), "--seed", "5", "--utterances", "3", "--min-frames", "4", "--max-frames", "6"]);
    }
    for utt in ["001_xaud", "002_xaud", "003_xaud"] {
        for ext in ["ult", "param", "wav"] {
            let f = format!("synth01/{utt}.{ext}");
            assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f}");
        }
    }
    let m = RunManifest::read(a.path()).unwrap();
    assert_eq!(m.command, "generate-corpus");
    assert_eq!(m.seed, Some(5));
    assert_eq!(m.config["corpus.utterances"], "3");
    assert_eq!(m.config["corpus.max_frames"], "6");
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# corpus\nseed: 9\ncorpus.utterances: 2\ncorpus.min_frames: 3\ncorpus.max_frames: 3\n").unwrap();
    let out = dir.path().join("c");
    ok(&["--config", p(&cfg), "generate-corpus", "--out", p(&out), "--utterances", "1"]);
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.seed, Some(9));
    assert_eq!(m.config["corpus.utterances"], "1");
    assert_eq!(m.config_file.as_deref(), Some(cfg.as_path()));
    assert!(out.join("synth01/001_xaud.ult").exists());
    assert!(!out.join("synth01/002_xaud.ult").exists());
}

#[test]
fn preprocessing_writes_split_and_features() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path());
    let split = std::fs::read_to_string(prep.join("synth01/split.jsonl")).unwrap();
    let records: Vec<Value> = split.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 24);
    let count = |role: &str| records.iter().filter(|r| r["split"] == role).count();
    assert_eq!((count("train"), count("dev"), count("test")), (13, 1, 10));
    for ext in ["frames", "mel", "wav"] {
        assert!(prep.join(format!("synth01/017_xaud.{ext}")).exists());
    }
}

#[test]
fn evaluating_a_system_against_itself_gives_zero_distance_and_unit_p() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path());
    let out = dir.path().join("eval");
    let sys = format!("natural={}", p(&prep));
    let copy = format!("copy={}", p(&prep));
    let o = ok(&["evaluate", "--systems", &sys, &copy, "--data", p(&prep), "--out", p(&out)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("synth01"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join(REPORT_JSON)).unwrap()).unwrap();
    for cell in report["cells"].as_array().unwrap() {
        assert_eq!(cell["n"], 10);
        assert_eq!(cell["mean_mse"], 0.0);
        assert_eq!(cell["mean_mcd"], 0.0);
        if cell["system"] == "copy" {
            assert_eq!(cell["p_mse"], 1.0);
            assert_eq!(cell["p_mcd"], 1.0);
        }
    }
    assert!(out.join(REPORT_TABLES).exists());
}

#[test]
fn train_synthesize_evaluate_and_prepare_a_listening_test() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path());
    let ckpt = dir.path().join("ckpt");
    ok(&[
        "train", "--speaker", "synth01", "--model", "conformer", "--data", p(&prep), "--out", p(&ckpt), "--seed", "4", "--max-epochs", "1", "--batch-size", "32",
    ]);
    for f in ["manifest.json", "weights.bin", "history.jsonl", "run.json"] {
        assert!(ckpt.join(f).exists(), "{f}");
    }
    let m = RunManifest::read(&ckpt).unwrap();
    assert_eq!(m.details["model"], "conformer");
    assert_eq!(m.config["train.batch_size"], "32");
    assert_eq!(m.config["train.patience"], "3");

    let syn = dir.path().join("syn");
    ok(&["synthesize", "--checkpoint", p(&ckpt), "--utterance", "test", "--vocoder", "fallback", "--out", p(&syn)]);
    assert_eq!(std::fs::read_dir(syn.join("synth01")).unwrap().count(), 20);

    let eval = dir.path().join("eval");
    let natural = format!("natural={}", p(&prep));
    let conf = format!("conformer={}", p(&syn));
    ok(&["evaluate", "--systems", &natural, &conf, "--data", p(&prep), "--out", p(&eval)]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(eval.join(REPORT_JSON)).unwrap()).unwrap();
    let cell = report["cells"].as_array().unwrap().iter().find(|c| c["system"] == "conformer").unwrap().clone();
    assert!(cell["mean_mse"].as_f64().unwrap() > 0.0);
    assert!(cell["p_mse"].as_f64().unwrap() < 0.05);

    let mushra = dir.path().join("mushra");
    let other = format!("again={}", p(&syn));
    ok(&["mushra", "prepare", "--reference", p(&prep), "--systems", &conf, &other, "--noise-level", "0.0005", "--seed", "2", "--out", p(&mushra)]);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(mushra.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["utterances"].as_array().unwrap().len(), 5);
}

#[test]
fn missing_external_vocoder_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synthesize", "--checkpoint", p(dir.path()), "--utterance", "x", "--vocoder", "external", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocoder"));
}
