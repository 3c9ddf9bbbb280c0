use std::path::Path;

use serde::{Deserialize, Serialize};
use ultraspeech_nn::{ParamStore, Tensor};

use crate::model::Model;
use crate::spec::ModelSpec;
use crate::{ModelError, Result};

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
const MAGIC: [u8; 8] = *b"UTSCKPT\x01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Human-readable companion of the weight archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub spec: ModelSpec,
    pub parameter_count: usize,
    pub tensors: Vec<TensorEntry>,
    /// Caller-supplied metadata such as normalization statistics.
    #[serde(default)]
    pub extra: serde_json::Value,
}

fn ckpt_err(path: &Path, reason: impl Into<String>) -> ModelError {
    ModelError::Checkpoint { path: path.to_path_buf(), reason: reason.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.to_path_buf(), source }
}

/// Writes `weights.bin` (named tensors as little-endian f32) and
/// `manifest.json` into `dir`.
///
/// Archive layout: magic, `u32` tensor count, then per tensor a `u32`
/// name length, the UTF-8 name, a `u32` rank, `u32` dimensions and the
/// row-major values.
pub fn save_checkpoint(dir: &Path, model: &Model<f32>, extra: serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut buf = MAGIC.to_vec();
    let params = model.params();
    buf.extend((params.len() as u32).to_le_bytes());
    let mut tensors = Vec::with_capacity(params.len());
    for (_, name, t) in params.iter() {
        buf.extend((name.len() as u32).to_le_bytes());
        buf.extend(name.as_bytes());
        buf.extend((t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend((d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend(v.to_le_bytes());
        }
        tensors.push(TensorEntry { name: name.to_string(), shape: t.shape().to_vec() });
    }
    let weights = dir.join(WEIGHTS_FILE);
    std::fs::write(&weights, buf).map_err(io_err(&weights))?;
    let manifest = CheckpointManifest { spec: model.spec().clone(), parameter_count: model.parameter_count(), tensors, extra };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(io_err(&path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ckpt_err(self.path, "truncated weight archive"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model<f32>, CheckpointManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| ckpt_err(&manifest_path, e.to_string()))?;
    let path = dir.join(WEIGHTS_FILE);
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path: &path };
    if cur.take(8)? != MAGIC {
        return Err(ckpt_err(&path, "not a weight archive"));
    }
    let count = cur.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let len = cur.u32()?;
        let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| ckpt_err(&path, "tensor name is not UTF-8"))?;
        let rank = cur.u32()?;
        let shape = (0..rank).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = cur.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        params.add(name, Tensor::from_vec(&shape, data)?)?;
    }
    if cur.pos != bytes.len() {
        return Err(ckpt_err(&path, "trailing bytes after the last tensor"));
    }
    let model = Model::from_params(manifest.spec.clone(), params)?;
    if model.parameter_count() != manifest.parameter_count {
        return Err(ckpt_err(&path, "parameter count disagrees with the manifest"));
    }
    Ok((model, manifest))
}
