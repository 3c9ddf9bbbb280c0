//! Multi-head self-attention with Transformer-XL style relative positions.
//!
//! For head `h`, query step `i` and key step `j`:
//!
//! ```text
//! score[i, j] = ((q_i + u_h) · k_j + (q_i + v_h) · p_{i-j}) / sqrt(d_head)
//! out_i       = Σ_j softmax_j(score[i, ·]) v_j
//! ```
//!
//! `p` holds one projected embedding per relative offset, row `r` standing
//! for offset `i - j = seq_len - 1 - r`, so it has `2 * seq_len - 1` rows.

use crate::gemm::{gemm, MatMut, MatRef};
use crate::graph::{Backward, Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

/// Sinusoidal encodings for offsets `seq_len - 1` down to `-(seq_len - 1)`.
pub fn relative_position_encoding<F: Scalar>(seq_len: usize, dim: usize) -> Tensor<F> {
    let rows = 2 * seq_len - 1;
    let mut data = vec![F::zero(); rows * dim];
    for r in 0..rows {
        let offset = (seq_len as f64 - 1.0) - r as f64;
        for k in (0..dim).step_by(2) {
            let freq = (-(k as f64) * (10000f64).ln() / dim as f64).exp();
            data[r * dim + k] = F::of((offset * freq).sin());
            if k + 1 < dim {
                data[r * dim + k + 1] = F::of((offset * freq).cos());
            }
        }
    }
    Tensor::from_vec(&[rows, dim], data).expect("rows * dim")
}

#[derive(Clone, Copy)]
struct Dims {
    batch: usize,
    seq: usize,
    heads: usize,
    head_dim: usize,
}

impl Dims {
    fn model(&self) -> usize {
        self.heads * self.head_dim
    }
    fn rel(&self) -> usize {
        2 * self.seq - 1
    }
}

fn add_head_bias<F: Scalar>(x: &[F], bias: &[F], d: usize) -> Vec<F> {
    let mut out = x.to_vec();
    for row in out.chunks_exact_mut(d) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
    out
}

/// View of head `h` in sequence `b` of a `[batch * seq, model]` buffer.
fn head<F>(data: &[F], dims: Dims, b: usize, h: usize) -> MatRef<'_, F> {
    MatRef::strided(data, b * dims.seq * dims.model() + h * dims.head_dim, dims.seq, dims.head_dim, dims.model(), 1)
}

fn head_mut<F>(data: &mut [F], dims: Dims, b: usize, h: usize) -> MatMut<'_, F> {
    let off = b * dims.seq * dims.model() + h * dims.head_dim;
    MatMut::strided(data, off, dims.seq, dims.head_dim, dims.model(), 1)
}

/// Head `h` across all sequences at once, `[batch * seq, head_dim]`.
fn all_rows<F>(data: &[F], dims: Dims, h: usize) -> MatRef<'_, F> {
    MatRef::strided(data, h * dims.head_dim, dims.batch * dims.seq, dims.head_dim, dims.model(), 1)
}

fn all_rows_mut<F>(data: &mut [F], dims: Dims, h: usize) -> MatMut<'_, F> {
    MatMut::strided(data, h * dims.head_dim, dims.batch * dims.seq, dims.head_dim, dims.model(), 1)
}

fn pos_head<F>(data: &[F], dims: Dims, h: usize) -> MatRef<'_, F> {
    MatRef::strided(data, h * dims.head_dim, dims.rel(), dims.head_dim, dims.model(), 1)
}

struct RelAttentionBack<F> {
    dims: Dims,
    /// Softmax weights, `[batch, heads, seq, seq]`.
    probs: Vec<F>,
}

impl<F: Scalar> Backward<F> for RelAttentionBack<F> {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let dims = self.dims;
        let (t, dh, d, rel) = (dims.seq, dims.head_dim, dims.model(), dims.rel());
        let (q, k, v, pos, u_bias, v_bias) = (inputs[0], inputs[1], inputs[2], inputs[3], inputs[4], inputs[5]);
        let qu = add_head_bias(q.data(), u_bias.data(), d);
        let qv = add_head_bias(q.data(), v_bias.data(), d);
        let scale = F::one() / F::of(dh as f64).sqrt();
        let g = grad.data();

        let mut dqu = vec![F::zero(); q.len()];
        let mut dqv = vec![F::zero(); q.len()];
        let mut dk = vec![F::zero(); k.len()];
        let mut dv = vec![F::zero(); v.len()];
        let mut dpos = vec![F::zero(); pos.len()];
        let mut draw = vec![F::zero(); dims.batch * t * rel];
        let mut d_a = vec![F::zero(); t * t];

        for h in 0..dims.heads {
            draw.iter_mut().for_each(|x| *x = F::zero());
            for b in 0..dims.batch {
                let base = (b * dims.heads + h) * t * t;
                let a = &self.probs[base..base + t * t];
                gemm(F::one(), head(g, dims, b, h), head(v.data(), dims, b, h).t(), F::zero(), MatMut::new(&mut d_a, t, t));
                gemm(F::one(), MatRef::new(a, t, t).t(), head(g, dims, b, h), F::zero(), head_mut(&mut dv, dims, b, h));
                // d_a becomes d(score) in place.
                for i in 0..t {
                    let arow = &a[i * t..(i + 1) * t];
                    let drow = &mut d_a[i * t..(i + 1) * t];
                    let dot: F = arow.iter().zip(drow.iter()).map(|(&x, &y)| x * y).sum();
                    for j in 0..t {
                        drow[j] = arow[j] * (drow[j] - dot) * scale;
                    }
                    let raw_row = &mut draw[(b * t + i) * rel..(b * t + i + 1) * rel];
                    for j in 0..t {
                        raw_row[t - 1 - i + j] = drow[j];
                    }
                }
                gemm(F::one(), MatRef::new(&d_a, t, t), head(k.data(), dims, b, h), F::zero(), head_mut(&mut dqu, dims, b, h));
                gemm(F::one(), MatRef::new(&d_a, t, t).t(), head(&qu, dims, b, h), F::zero(), head_mut(&mut dk, dims, b, h));
            }
            let draw_m = MatRef::new(&draw, dims.batch * t, rel);
            gemm(F::one(), draw_m, pos_head(pos.data(), dims, h), F::zero(), all_rows_mut(&mut dqv, dims, h));
            let dpos_h = MatMut::strided(&mut dpos, h * dh, rel, dh, d, 1);
            gemm(F::one(), draw_m.t(), all_rows(&qv, dims, h), F::zero(), dpos_h);
        }

        let column_sums = |x: &[F]| {
            let mut s = vec![F::zero(); d];
            for row in x.chunks_exact(d) {
                for (acc, &val) in s.iter_mut().zip(row) {
                    *acc += val;
                }
            }
            s
        };
        let du = needs[4].then(|| Tensor::from_vec(u_bias.shape(), column_sums(&dqu)).expect("model dim"));
        let dvb = needs[5].then(|| Tensor::from_vec(v_bias.shape(), column_sums(&dqv)).expect("model dim"));
        let dq = needs[0].then(|| {
            let sum: Vec<F> = dqu.iter().zip(&dqv).map(|(&a, &b)| a + b).collect();
            Tensor::from_vec(q.shape(), sum).expect("same shape")
        });
        vec![
            dq,
            needs[1].then(|| Tensor::from_vec(k.shape(), dk).expect("same shape")),
            needs[2].then(|| Tensor::from_vec(v.shape(), dv).expect("same shape")),
            needs[3].then(|| Tensor::from_vec(pos.shape(), dpos).expect("same shape")),
            du,
            dvb,
        ]
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// Attention core (no input/output projections).
    ///
    /// `q`, `k`, `v` are `[batch * seq_len, model]`; `pos` is
    /// `[2 * seq_len - 1, model]`; `u_bias` and `v_bias` hold `model`
    /// entries laid out head-major.
    #[allow(clippy::too_many_arguments)]
    pub fn rel_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        pos: Var,
        u_bias: Var,
        v_bias: Var,
        heads: usize,
        seq_len: usize,
    ) -> Result<Var> {
        let qv_ = self.value(q);
        let d = qv_.last_dim();
        if heads == 0 || d % heads != 0 {
            return Err(NnError::Shape(format!("attention: model dim {d} not divisible by {heads} heads")));
        }
        if seq_len == 0 || qv_.rows() % seq_len != 0 {
            return Err(NnError::Shape(format!("attention: {} rows not a multiple of {seq_len}", qv_.rows())));
        }
        for (name, var) in [("k", k), ("v", v)] {
            if self.value(var).shape() != qv_.shape() {
                return Err(NnError::Shape(format!("attention: {name} shape {:?} differs from q", self.value(var).shape())));
            }
        }
        if self.value(pos).shape() != [2 * seq_len - 1, d] {
            return Err(NnError::Shape(format!("attention: positional table {:?}", self.value(pos).shape())));
        }
        if self.value(u_bias).len() != d || self.value(v_bias).len() != d {
            return Err(NnError::Shape("attention: positional biases need model-dim entries".into()));
        }
        let dims = Dims { batch: qv_.rows() / seq_len, seq: seq_len, heads, head_dim: d / heads };
        let (t, rel) = (dims.seq, dims.rel());
        let qu = add_head_bias(qv_.data(), self.value(u_bias).data(), d);
        let qv = add_head_bias(qv_.data(), self.value(v_bias).data(), d);
        let (kd, vd, pd) = (self.value(k).data(), self.value(v).data(), self.value(pos).data());
        let scale = F::one() / F::of(dims.head_dim as f64).sqrt();

        let mut out = vec![F::zero(); qv_.len()];
        let mut probs = vec![F::zero(); dims.batch * heads * t * t];
        let mut raw = vec![F::zero(); dims.batch * t * rel];
        for h in 0..heads {
            gemm(F::one(), all_rows(&qv, dims, h), pos_head(pd, dims, h).t(), F::zero(), MatMut::new(&mut raw, dims.batch * t, rel));
            for b in 0..dims.batch {
                let base = (b * heads + h) * t * t;
                let s = &mut probs[base..base + t * t];
                gemm(F::one(), head(&qu, dims, b, h), head(kd, dims, b, h).t(), F::zero(), MatMut::new(s, t, t));
                for i in 0..t {
                    let raw_row = &raw[(b * t + i) * rel..(b * t + i + 1) * rel];
                    let row = &mut s[i * t..(i + 1) * t];
                    let mut max = F::neg_infinity();
                    for j in 0..t {
                        row[j] = (row[j] + raw_row[t - 1 - i + j]) * scale;
                        max = max.max(row[j]);
                    }
                    let mut sum = F::zero();
                    for x in row.iter_mut() {
                        *x = (*x - max).exp();
                        sum += *x;
                    }
                    for x in row.iter_mut() {
                        *x /= sum;
                    }
                }
                gemm(F::one(), MatRef::new(s, t, t), head(vd, dims, b, h), F::zero(), head_mut(&mut out, dims, b, h));
            }
        }
        let y = Tensor::from_vec(qv_.shape(), out)?;
        Ok(self.push(y, &[q, k, v, pos, u_bias, v_bias], RelAttentionBack { dims, probs }))
    }
}
