use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use ultraspeech_nn::Init;

use crate::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BaselineCnn,
    ConformerBase,
    ConformerBilstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::BaselineCnn, ModelKind::ConformerBase, ModelKind::ConformerBilstm];

    /// Short name used on the command line and in report tables.
    pub fn cli_name(self) -> &'static str {
        match self {
            ModelKind::BaselineCnn => "baseline",
            ModelKind::ConformerBase => "conformer",
            ModelKind::ConformerBilstm => "conformer-bilstm",
        }
    }

    pub fn is_conformer(self) -> bool {
        !matches!(self, ModelKind::BaselineCnn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "baseline_cnn" | "cnn" => Ok(ModelKind::BaselineCnn),
            "conformer" | "conformer_base" => Ok(ModelKind::ConformerBase),
            "conformer-bilstm" | "conformer_bilstm" => Ok(ModelKind::ConformerBilstm),
            other => Err(ModelError::InvalidSpec(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformerBlockConfig {
    pub encoder_dim: usize,
    pub attention_heads: usize,
    pub conv_kernel: usize,
    pub ff_expansion: usize,
    pub dropout: f64,
}

impl Default for ConformerBlockConfig {
    fn default() -> Self {
        Self { encoder_dim: 256, attention_heads: 32, conv_kernel: 31, ff_expansion: 3, dropout: 0.1 }
    }
}

impl ConformerBlockConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ModelError::InvalidSpec(msg));
        if self.encoder_dim == 0 || self.attention_heads == 0 || self.encoder_dim % self.attention_heads != 0 {
            return bad(format!("encoder dim {} not divisible by {} heads", self.encoder_dim, self.attention_heads));
        }
        if self.conv_kernel % 2 == 0 {
            return bad(format!("conv kernel {} must be odd", self.conv_kernel));
        }
        if self.ff_expansion == 0 {
            return bad("feed-forward expansion must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn ff_dim(&self) -> usize {
        self.encoder_dim * self.ff_expansion
    }
}

/// Convolutional stack of the baseline: "same"-padded convolutions with
/// swish activations, an optional 2×2 max pool after any of them, then one
/// hidden dense layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub strides: Vec<(usize, usize)>,
    pub pool_after: Vec<bool>,
    pub dense: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters: vec![30, 60, 90, 120],
            kernel: 13,
            strides: vec![(2, 2), (2, 2), (2, 1), (2, 2)],
            pool_after: vec![false, true, false, false],
            dense: 520,
            dropout: 0.1,
        }
    }
}

impl CnnConfig {
    fn validate(&self) -> Result<()> {
        let n = self.filters.len();
        if n == 0 || self.strides.len() != n || self.pool_after.len() != n {
            return Err(ModelError::InvalidSpec("filters, strides and pool flags must have equal, non-zero length".into()));
        }
        if self.kernel == 0 || self.dense == 0 || self.filters.contains(&0) || self.strides.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(ModelError::InvalidSpec("CNN sizes and strides must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidSpec(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Spatial size after every layer, starting from `h × w`.
    pub fn feature_map(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        for (i, &(sh, sw)) in self.strides.iter().enumerate() {
            h = h.div_ceil(sh);
            w = w.div_ceil(sw);
            if self.pool_after[i] {
                h /= 2;
                w /= 2;
            }
            if h == 0 || w == 0 {
                return Err(ModelError::InvalidSpec(format!("feature map vanishes after conv layer {}", i + 1)));
            }
        }
        Ok((h, w))
    }
}

/// Declarative description of one architecture.
///
/// The pipeline always uses `64 × 128` inputs and 80 outputs (see
/// [`ModelSpec::validate_pipeline_io`]); smaller sizes exist for
/// finite-difference checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub block: ConformerBlockConfig,
    pub bilstm_hidden: usize,
    pub cnn: CnnConfig,
    pub scanlines: usize,
    pub samples_per_line: usize,
    pub output_dim: usize,
}

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitRule {
    Base(Init),
    /// Zeros except a forget-gate block of ones in `[i | f | g | o]` order.
    LstmBias { hidden: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitRule,
}

impl ParamSpec {
    fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self { name: name.into(), shape: shape.to_vec(), init: InitRule::Base(init) }
    }

    pub fn count(&self) -> usize {
        self.shape.iter().product()
    }
}

fn glorot(fan_in: usize, fan_out: usize) -> Init {
    Init::GlorotUniform { fan_in, fan_out }
}

fn dense(out: &mut Vec<ParamSpec>, name: &str, fan_in: usize, fan_out: usize, bias: bool) {
    out.push(ParamSpec::new(format!("{name}.w"), &[fan_in, fan_out], glorot(fan_in, fan_out)));
    if bias {
        out.push(ParamSpec::new(format!("{name}.b"), &[fan_out], Init::Zeros));
    }
}

fn norm(out: &mut Vec<ParamSpec>, name: &str, dim: usize) {
    out.push(ParamSpec::new(format!("{name}.gamma"), &[dim], Init::Constant(1.0)));
    out.push(ParamSpec::new(format!("{name}.beta"), &[dim], Init::Zeros));
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            block: ConformerBlockConfig::default(),
            bilstm_hidden: 256,
            cnn: CnnConfig::default(),
            scanlines: 64,
            samples_per_line: 128,
            output_dim: 80,
        }
    }

    /// Miniature version of `kind` with the same topology, small enough for
    /// element-wise finite-difference checks: 8-wide encoder with 2 heads,
    /// 3 LSTM units per direction, a 4-layer CNN with 2-3 filters, on
    /// `16 × 16` inputs with 3 outputs.
    pub fn toy(kind: ModelKind) -> Self {
        Self {
            kind,
            block: ConformerBlockConfig { encoder_dim: 8, attention_heads: 2, conv_kernel: 3, ff_expansion: 3, dropout: 0.1 },
            bilstm_hidden: 3,
            cnn: CnnConfig { filters: vec![2, 3, 2, 2], kernel: 3, dense: 4, ..CnnConfig::default() },
            scanlines: 16,
            samples_per_line: 16,
            output_dim: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scanlines == 0 || self.samples_per_line == 0 || self.output_dim == 0 {
            return Err(ModelError::InvalidSpec("input and output sizes must be positive".into()));
        }
        match self.kind {
            ModelKind::BaselineCnn => {
                self.cnn.validate()?;
                self.cnn.feature_map(self.scanlines, self.samples_per_line).map(|_| ())
            }
            ModelKind::ConformerBase => self.block.validate(),
            ModelKind::ConformerBilstm => {
                if self.bilstm_hidden == 0 {
                    return Err(ModelError::InvalidSpec("bi-LSTM hidden size must be positive".into()));
                }
                self.block.validate()
            }
        }
    }

    /// The I/O contract of the full pipeline: `64 × 128` in, 80 out.
    pub fn validate_pipeline_io(&self) -> Result<()> {
        if (self.scanlines, self.samples_per_line, self.output_dim) != (64, 128, 80) {
            return Err(ModelError::InvalidSpec(format!(
                "pipeline models take 64x128 frames and emit 80 bins, got {}x{} -> {}",
                self.scanlines, self.samples_per_line, self.output_dim
            )));
        }
        self.validate()
    }

    pub fn frame_len(&self) -> usize {
        self.scanlines * self.samples_per_line
    }

    fn block_layout(&self, out: &mut Vec<ParamSpec>) {
        let b = &self.block;
        let (d, ff) = (b.encoder_dim, b.ff_dim());
        for ffn in ["block.ffn1", "block.ffn2"] {
            norm(out, &format!("{ffn}.ln"), d);
            dense(out, &format!("{ffn}.up"), d, ff, true);
            dense(out, &format!("{ffn}.down"), ff, d, true);
        }
        norm(out, "block.mhsa.ln", d);
        for proj in ["q", "k", "v", "out"] {
            dense(out, &format!("block.mhsa.{proj}"), d, d, true);
        }
        dense(out, "block.mhsa.pos", d, d, false);
        let head_dim = d / b.attention_heads;
        let bias_limit = (6.0 / (b.attention_heads + head_dim) as f64).sqrt();
        out.push(ParamSpec::new("block.mhsa.pos_bias_u", &[d], Init::Uniform(bias_limit)));
        out.push(ParamSpec::new("block.mhsa.pos_bias_v", &[d], Init::Uniform(bias_limit)));
        norm(out, "block.conv.ln", d);
        dense(out, "block.conv.pw1", d, 2 * d, true);
        let k = b.conv_kernel;
        out.push(ParamSpec::new("block.conv.dw.kernel", &[k, d], Init::Uniform(1.0 / (k as f64).sqrt())));
        out.push(ParamSpec::new("block.conv.dw.bias", &[d], Init::Zeros));
        norm(out, "block.conv.norm", d);
        dense(out, "block.conv.pw2", d, d, true);
        norm(out, "block.final_ln", d);
    }

    fn lstm_layout(out: &mut Vec<ParamSpec>, name: &str, input: usize, hidden: usize) {
        out.push(ParamSpec::new(format!("{name}.w_ih"), &[input, 4 * hidden], glorot(input, 4 * hidden)));
        out.push(ParamSpec::new(format!("{name}.w_hh"), &[hidden, 4 * hidden], glorot(hidden, 4 * hidden)));
        out.push(ParamSpec { name: format!("{name}.bias"), shape: vec![4 * hidden], init: InitRule::LstmBias { hidden } });
    }

    /// Every trainable tensor with its shape and initializer, in a fixed order.
    pub fn parameter_layout(&self) -> Result<Vec<ParamSpec>> {
        self.validate()?;
        let mut out = Vec::new();
        match self.kind {
            ModelKind::BaselineCnn => {
                let c = &self.cnn;
                let mut channels = 1;
                for (i, &f) in c.filters.iter().enumerate() {
                    let patch = c.kernel * c.kernel;
                    out.push(ParamSpec::new(format!("conv{}.kernel", i + 1), &[c.kernel, c.kernel, channels, f], glorot(patch * channels, patch * f)));
                    out.push(ParamSpec::new(format!("conv{}.bias", i + 1), &[f], Init::Zeros));
                    channels = f;
                }
                let (h, w) = c.feature_map(self.scanlines, self.samples_per_line)?;
                dense(&mut out, "hidden", h * w * channels, c.dense, true);
                dense(&mut out, "out", c.dense, self.output_dim, true);
            }
            ModelKind::ConformerBase | ModelKind::ConformerBilstm => {
                let d = self.block.encoder_dim;
                dense(&mut out, "input", self.samples_per_line, d, true);
                self.block_layout(&mut out);
                if self.kind == ModelKind::ConformerBilstm {
                    let h = self.bilstm_hidden;
                    for (layer, input) in [(1, d), (2, 2 * h)] {
                        for dir in ["fw", "bw"] {
                            Self::lstm_layout(&mut out, &format!("lstm{layer}.{dir}"), input, h);
                        }
                    }
                    dense(&mut out, "post", 2 * h, d, true);
                } else {
                    dense(&mut out, "post", d, d, true);
                }
                dense(&mut out, "out", self.scanlines * d, self.output_dim, true);
            }
        }
        Ok(out)
    }
}
