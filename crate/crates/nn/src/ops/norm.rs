use crate::graph::{Backward, Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

pub const NORM_EPS: f64 = 1e-5;

/// Normalises `count` values spaced `stride` apart starting at `base`.
/// Returns the inverse standard deviation.
fn normalize_strided<F: Scalar>(x: &[F], out: &mut [F], base: usize, count: usize, stride: usize, eps: F) -> F {
    let n = F::of(count as f64);
    let mut mean = F::zero();
    for k in 0..count {
        mean += x[base + k * stride];
    }
    mean /= n;
    let mut var = F::zero();
    for k in 0..count {
        let d = x[base + k * stride] - mean;
        var += d * d;
    }
    var /= n;
    let inv = F::one() / (var + eps).sqrt();
    for k in 0..count {
        let i = base + k * stride;
        out[i] = (x[i] - mean) * inv;
    }
    inv
}

/// Shared backward for both normalisations: groups of `count` elements
/// strided by `stride`, with the affine parameters indexed by `channel_of`.
#[allow(clippy::too_many_arguments)]
fn norm_backward<F: Scalar>(
    xhat: &[F],
    inv_std: &[F],
    grad: &[F],
    gamma: &[F],
    groups: impl Iterator<Item = (usize, usize)>,
    count: usize,
    stride: usize,
    channel_of: impl Fn(usize) -> usize,
    dx: &mut [F],
    dgamma: &mut [F],
    dbeta: &mut [F],
) {
    let n = F::of(count as f64);
    for (g_idx, base) in groups {
        let mut mean_d = F::zero();
        let mut mean_dx = F::zero();
        for k in 0..count {
            let i = base + k * stride;
            let c = channel_of(i);
            let d = grad[i] * gamma[c];
            mean_d += d;
            mean_dx += d * xhat[i];
            dgamma[c] += grad[i] * xhat[i];
            dbeta[c] += grad[i];
        }
        mean_d /= n;
        mean_dx /= n;
        let inv = inv_std[g_idx];
        for k in 0..count {
            let i = base + k * stride;
            let d = grad[i] * gamma[channel_of(i)];
            dx[i] = inv * (d - mean_d - xhat[i] * mean_dx);
        }
    }
}

struct LayerNormBack<F> {
    xhat: Vec<F>,
    inv_std: Vec<F>,
    dim: usize,
}

impl<F: Scalar> Backward<F> for LayerNormBack<F> {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let d = self.dim;
        let rows = self.inv_std.len();
        let mut dx = Tensor::zeros(inputs[0].shape());
        let mut dgamma = vec![F::zero(); d];
        let mut dbeta = vec![F::zero(); d];
        norm_backward(
            &self.xhat,
            &self.inv_std,
            grad.data(),
            inputs[1].data(),
            (0..rows).map(|r| (r, r * d)),
            d,
            1,
            |i| i % d,
            dx.data_mut(),
            &mut dgamma,
            &mut dbeta,
        );
        vec![
            needs[0].then_some(dx),
            needs[1].then(|| Tensor::from_vec(&[d], dgamma).expect("len d")),
            needs[2].then(|| Tensor::from_vec(&[d], dbeta).expect("len d")),
        ]
    }
}

struct SeqNormBack<F> {
    xhat: Vec<F>,
    inv_std: Vec<F>,
    seq_len: usize,
    channels: usize,
}

impl<F: Scalar> Backward<F> for SeqNormBack<F> {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let (t, c) = (self.seq_len, self.channels);
        let batches = self.inv_std.len() / c;
        let mut dx = Tensor::zeros(inputs[0].shape());
        let mut dgamma = vec![F::zero(); c];
        let mut dbeta = vec![F::zero(); c];
        norm_backward(
            &self.xhat,
            &self.inv_std,
            grad.data(),
            inputs[1].data(),
            (0..batches * c).map(|g| (g, (g / c) * t * c + g % c)),
            t,
            c,
            |i| i % c,
            dx.data_mut(),
            &mut dgamma,
            &mut dbeta,
        );
        vec![
            needs[0].then_some(dx),
            needs[1].then(|| Tensor::from_vec(&[c], dgamma).expect("len c")),
            needs[2].then(|| Tensor::from_vec(&[c], dbeta).expect("len c")),
        ]
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// Layer normalisation over the trailing axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = xv.last_dim();
        if self.value(gamma).len() != d || self.value(beta).len() != d {
            return Err(NnError::Shape(format!("layer_norm: affine parameters must have {d} entries")));
        }
        let rows = xv.rows();
        let eps = F::of(NORM_EPS);
        let mut xhat = vec![F::zero(); xv.len()];
        let inv_std: Vec<F> = (0..rows).map(|r| normalize_strided(xv.data(), &mut xhat, r * d, d, 1, eps)).collect();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let y: Vec<F> = xhat.iter().enumerate().map(|(i, &h)| h * g[i % d] + b[i % d]).collect();
        let y = Tensor::from_vec(xv.shape(), y)?;
        Ok(self.push(y, &[x, gamma, beta], LayerNormBack { xhat, inv_std, dim: d }))
    }

    /// Per-channel normalisation over the time axis of each sequence.
    ///
    /// `x` is `[batch * seq_len, channels]`, rows ordered sequence-major.
    /// Statistics never mix sequences, so the result does not depend on the
    /// batch composition.
    pub fn seq_norm(&mut self, x: Var, gamma: Var, beta: Var, seq_len: usize) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.last_dim();
        if seq_len == 0 || xv.rows() % seq_len != 0 {
            return Err(NnError::Shape(format!("seq_norm: {} rows not a multiple of {seq_len}", xv.rows())));
        }
        if self.value(gamma).len() != c || self.value(beta).len() != c {
            return Err(NnError::Shape(format!("seq_norm: affine parameters must have {c} entries")));
        }
        let batches = xv.rows() / seq_len;
        let eps = F::of(NORM_EPS);
        let mut xhat = vec![F::zero(); xv.len()];
        let inv_std: Vec<F> = (0..batches * c)
            .map(|g| normalize_strided(xv.data(), &mut xhat, (g / c) * seq_len * c + g % c, seq_len, c, eps))
            .collect();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let y: Vec<F> = xhat.iter().enumerate().map(|(i, &h)| h * g[i % c] + b[i % c]).collect();
        let y = Tensor::from_vec(xv.shape(), y)?;
        Ok(self.push(y, &[x, gamma, beta], SeqNormBack { xhat, inv_std, seq_len, channels: c }))
    }
}
