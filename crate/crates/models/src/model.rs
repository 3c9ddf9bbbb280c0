use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ultraspeech_nn::{Graph, Mode, ParamStore, Scalar, Tensor, Var};

use crate::cnn::cnn_forward;
use crate::conformer::conformer_forward;
use crate::spec::{InitRule, ModelKind, ModelSpec};
use crate::{ModelError, Result};

/// Frames per forward pass in [`Model::predict`].
pub const PREDICT_BATCH: usize = 64;

/// Exact number of trainable scalars of `spec`.
pub fn count_parameters(spec: &ModelSpec) -> Result<usize> {
    Ok(spec.parameter_layout()?.iter().map(|p| p.count()).sum())
}

/// Forward pass of `spec` on any graph whose parameter store follows
/// `spec.parameter_layout()`. `x` is `[batch, frame_len]`; the result is
/// `[batch, output_dim]`.
pub fn build_forward<F: Scalar>(spec: &ModelSpec, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
    let shape = g.shape(x);
    if shape.len() != 2 || shape[1] != spec.frame_len() {
        return Err(ModelError::Shape(format!("expected [batch, {}] input, got {shape:?}", spec.frame_len())));
    }
    match spec.kind {
        ModelKind::BaselineCnn => cnn_forward(spec, g, x),
        ModelKind::ConformerBase | ModelKind::ConformerBilstm => conformer_forward(spec, g, x),
    }
}

/// An architecture together with its weights.
#[derive(Clone, Debug)]
pub struct Model<F: Scalar = f32> {
    spec: ModelSpec,
    params: ParamStore<F>,
}

impl<F: Scalar> Model<F> {
    /// Freshly initialized weights: Glorot-uniform matrices, zero biases,
    /// unit normalization gains and a forget-gate bias of one.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for p in spec.parameter_layout()? {
            let value = match p.init {
                InitRule::Base(init) => init.sample(&p.shape, &mut rng),
                InitRule::LstmBias { hidden } => {
                    let mut t = Tensor::zeros(&p.shape);
                    t.data_mut()[hidden..2 * hidden].fill(F::one());
                    t
                }
            };
            params.add(p.name, value)?;
        }
        Ok(Self { spec, params })
    }

    /// Wraps existing weights after checking them against the layout of `spec`.
    pub fn from_params(spec: ModelSpec, params: ParamStore<F>) -> Result<Self> {
        let layout = spec.parameter_layout()?;
        if layout.len() != params.len() {
            return Err(ModelError::Shape(format!("{} tensors for a layout of {}", params.len(), layout.len())));
        }
        for p in &layout {
            let id = params.id(&p.name).ok_or_else(|| ModelError::Shape(format!("missing tensor `{}`", p.name)))?;
            if params.get(id).shape() != p.shape.as_slice() {
                return Err(ModelError::Shape(format!("tensor `{}` has shape {:?}, expected {:?}", p.name, params.get(id).shape(), p.shape)));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model { spec: self.spec.clone(), params: self.params.cast() }
    }

    /// Builds the forward pass on `g`, which must be a graph over this
    /// model's parameters. `x` is `[batch, frame_len]`.
    pub fn forward(&self, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
        if !std::ptr::eq(g.params(), &self.params) {
            return Err(ModelError::Shape("graph is bound to a different parameter store".into()));
        }
        build_forward(&self.spec, g, x)
    }

    /// Inference-mode outputs for `frames` (`n × frame_len`), `n × output_dim`.
    pub fn predict(&self, frames: &[F]) -> Result<Vec<F>> {
        let len = self.spec.frame_len();
        if frames.len() % len != 0 {
            return Err(ModelError::Shape(format!("{} values is not a whole number of {len}-value frames", frames.len())));
        }
        let mut out = Vec::with_capacity(frames.len() / len * self.spec.output_dim);
        for chunk in frames.chunks(PREDICT_BATCH * len) {
            let mut g = Graph::new(&self.params, Mode::Eval);
            let x = g.constant(Tensor::from_vec(&[chunk.len() / len, len], chunk.to_vec())?);
            let y = self.forward(&mut g, x)?;
            out.extend_from_slice(g.value(y).data());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ConformerBlockConfig;

    #[test]
    fn forget_gate_bias_starts_at_one() {
        let mut spec = ModelSpec::new(ModelKind::ConformerBilstm);
        spec.block = ConformerBlockConfig { encoder_dim: 4, attention_heads: 2, conv_kernel: 3, ff_expansion: 2, dropout: 0.0 };
        spec.bilstm_hidden = 3;
        spec.scanlines = 2;
        spec.samples_per_line = 3;
        spec.output_dim = 2;
        let model = Model::<f64>::new(spec, 0).unwrap();
        let bias = model.params().get(model.params().id("lstm1.fw.bias").unwrap()).data().to_vec();
        assert_eq!(bias, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn from_params_checks_layout() {
        let spec = ModelSpec::new(ModelKind::BaselineCnn);
        let model = Model::<f32>::new(spec.clone(), 1).unwrap();
        assert!(Model::from_params(spec.clone(), model.params().clone()).is_ok());
        let mut other = spec;
        other.cnn.dense = 100;
        assert!(Model::from_params(other, model.params().clone()).is_err());
    }
}
