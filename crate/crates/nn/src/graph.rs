//! Define-by-run tape.
//!
//! Every operation appends a node holding its output value and, when any of
//! its inputs needs a gradient, a boxed backward closure. `backward` walks
//! the tape in reverse and accumulates gradients into parameter slots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Deterministic forward pass.
    Eval,
}

/// Gradient rule of one operation.
///
/// `inputs` are the operand values in the order the node recorded them,
/// `needs[i]` tells whether a gradient for input `i` is wanted at all.
pub(crate) trait Backward<F: Scalar> {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>>;
}

enum Value<F> {
    Owned(Tensor<F>),
    Param(ParamId),
}

enum Leaf {
    Param(ParamId),
    Input,
}

struct Node<'a, F: Scalar> {
    value: Value<F>,
    inputs: Vec<Var>,
    rule: Option<Box<dyn Backward<F> + 'a>>,
    needs_grad: bool,
    leaf: Option<Leaf>,
}

pub struct Graph<'a, F: Scalar> {
    params: &'a ParamStore<F>,
    nodes: Vec<Node<'a, F>>,
    mode: Mode,
    rng: ChaCha8Rng,
}

/// Result of a backward pass.
pub struct Gradients<F> {
    params: Vec<Option<Tensor<F>>>,
    inputs: Vec<(Var, Tensor<F>)>,
}

impl<F: Scalar> Gradients<F> {
    pub fn param(&self, id: ParamId) -> Option<&Tensor<F>> {
        self.params.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to a node created by [`Graph::input`].
    pub fn input(&self, v: Var) -> Option<&Tensor<F>> {
        self.inputs.iter().find(|(w, _)| *w == v).map(|(_, t)| t)
    }

    pub fn into_params(self) -> Vec<Option<Tensor<F>>> {
        self.params
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    pub fn new(params: &'a ParamStore<F>, mode: Mode) -> Self {
        Self::with_seed(params, mode, 0)
    }

    /// `seed` drives dropout masks in [`Mode::Train`].
    pub fn with_seed(params: &'a ParamStore<F>, mode: Mode, seed: u64) -> Self {
        Self { params, nodes: Vec::new(), mode, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Parameter store that [`Graph::param`] ids refer to.
    pub fn params(&self) -> &'a ParamStore<F> {
        self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Leaf bound to a trainable parameter.
    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Param(id),
            inputs: Vec::new(),
            rule: None,
            needs_grad: true,
            leaf: Some(Leaf::Param(id)),
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf whose gradient is reported by [`Gradients::input`].
    pub fn input(&mut self, value: Tensor<F>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            inputs: Vec::new(),
            rule: None,
            needs_grad: true,
            leaf: Some(Leaf::Input),
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient (data, targets, fixed encodings).
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), inputs: Vec::new(), rule: None, needs_grad: false, leaf: None });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, value: Tensor<F>, inputs: &[Var], rule: impl Backward<F> + 'a) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let rule: Option<Box<dyn Backward<F> + 'a>> = if needs_grad { Some(Box::new(rule)) } else { None };
        self.nodes.push(Node { value: Value::Owned(value), inputs: inputs.to_vec(), rule, needs_grad, leaf: None });
        Var(self.nodes.len() - 1)
    }

    /// Reverse-mode sweep seeded with `d loss / d loss = 1`.
    ///
    /// `loss` must hold a single element.
    pub fn backward(&self, loss: Var) -> Gradients<F> {
        assert_eq!(self.value(loss).len(), 1, "backward expects a scalar loss");
        let mut grads: Vec<Option<Tensor<F>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), F::one()));
        let mut out = Gradients { params: (0..self.params.len()).map(|_| None).collect(), inputs: Vec::new() };

        for i in (0..=loss.0).rev() {
            let Some(grad) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.leaf {
                Some(Leaf::Param(id)) => {
                    match &mut out.params[id.0] {
                        Some(acc) => acc.add_assign(&grad),
                        slot => *slot = Some(grad),
                    }
                    continue;
                }
                Some(Leaf::Input) => {
                    out.inputs.push((Var(i), grad));
                    continue;
                }
                None => {}
            }
            let Some(rule) = &node.rule else { continue };
            let inputs: Vec<&Tensor<F>> = node.inputs.iter().map(|v| self.value(*v)).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|v| self.nodes[v.0].needs_grad).collect();
            let output = self.value(Var(i));
            let input_grads = rule.backward(&inputs, output, &grad, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for ((v, g), need) in node.inputs.iter().zip(input_grads).zip(needs) {
                let Some(g) = g else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(g.len(), self.value(*v).len(), "gradient shape mismatch");
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        out
    }
}
