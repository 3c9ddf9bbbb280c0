use anyhow::{Context, Result};
use serde_json::json;
use ultraspeech_mushra::{prepare_experiment, PrepareConfig, DEFAULT_ANCHOR_LEVEL, DEFAULT_UTTERANCES_PER_SPEAKER, MANIFEST_FILE};

use crate::corpus::absolute;
use crate::{PrepareArgs, RunManifest, ServeArgs, Settings};

pub fn prepare(a: &PrepareArgs, s: &mut Settings) -> Result<()> {
    let seed = s.get("seed", a.seed, 0u64)?;
    let cfg = PrepareConfig {
        reference_dir: a.reference.clone(),
        systems: a.systems.clone(),
        utterances_per_speaker: s.get("mushra.utterances_per_speaker", a.utterances_per_speaker, DEFAULT_UTTERANCES_PER_SPEAKER)?,
        noise_level: s.get("mushra.noise_level", a.noise_level, DEFAULT_ANCHOR_LEVEL)?,
        seed,
        out_dir: a.out.clone(),
    };
    let manifest = prepare_experiment(&cfg)?;
    log::info!("{} stimulus sets written; manifest at {}", manifest.utterances.len(), a.out.join(MANIFEST_FILE).display());
    let details = json!({
        "reference": absolute(&a.reference),
        "systems": a.systems.iter().map(|(n, d)| json!({ "name": n, "dir": absolute(d) })).collect::<Vec<_>>(),
        "stimulus_sets": manifest.utterances.len(),
    });
    RunManifest::new("mushra prepare", Some(seed), s, details).write(&a.out)
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting the async runtime")?;
    log::info!("serving listening tests on http://{} from {}", a.addr, a.data.display());
    runtime.block_on(ultraspeech_mushra::serve(a.addr, &a.data))?;
    Ok(())
}
