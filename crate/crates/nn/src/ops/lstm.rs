use crate::gemm::{gemm, matmul, MatMut, MatRef};
use crate::graph::{Backward, Graph, Var};
use crate::ops::basic::sigmoid;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Clone, Copy)]
struct LstmDims {
    batch: usize,
    seq: usize,
    input: usize,
    hidden: usize,
    reverse: bool,
}

impl LstmDims {
    /// Time index visited at processing step `s`.
    fn time(&self, s: usize) -> usize {
        if self.reverse {
            self.seq - 1 - s
        } else {
            s
        }
    }

    /// `rows` starting at time `t`, one row per sequence.
    fn at_time<'a, F>(&self, data: &'a [F], t: usize, width: usize) -> MatRef<'a, F> {
        MatRef::strided(data, t * width, self.batch, width, self.seq * width, 1)
    }

    fn at_time_mut<'a, F>(&self, data: &'a mut [F], t: usize, width: usize) -> MatMut<'a, F> {
        MatMut::strided(data, t * width, self.batch, width, self.seq * width, 1)
    }
}

struct LstmBack<F> {
    dims: LstmDims,
    /// Post-activation gates `[i | f | g | o]`, `[batch * seq, 4 * hidden]`.
    acts: Vec<F>,
    cells: Vec<F>,
}

impl<F: Scalar> Backward<F> for LstmBack<F> {
    fn backward(&self, inputs: &[&Tensor<F>], output: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let dims = self.dims;
        let (n, t_len, hd, ind) = (dims.batch * dims.seq, dims.seq, dims.hidden, dims.input);
        let g4 = 4 * hd;
        let (x, w_ih, w_hh) = (inputs[0].data(), inputs[1].data(), inputs[2].data());
        let h = output.data();
        let g = grad.data();
        let mut dgates = vec![F::zero(); n * g4];
        let mut dh_rec = vec![F::zero(); dims.batch * hd];
        let mut dc_rec = vec![F::zero(); dims.batch * hd];
        for s in (0..t_len).rev() {
            let t = dims.time(s);
            let t_prev = (s > 0).then(|| dims.time(s - 1));
            for b in 0..dims.batch {
                let row = b * t_len + t;
                let act = &self.acts[row * g4..(row + 1) * g4];
                let dg = &mut dgates[row * g4..(row + 1) * g4];
                for j in 0..hd {
                    let (i_g, f_g, c_g, o_g) = (act[j], act[hd + j], act[2 * hd + j], act[3 * hd + j]);
                    let tc = self.cells[row * hd + j].tanh();
                    let dh = g[row * hd + j] + dh_rec[b * hd + j];
                    let d_o = dh * tc;
                    let dc = dc_rec[b * hd + j] + dh * o_g * (F::one() - tc * tc);
                    let c_prev = t_prev.map_or(F::zero(), |tp| self.cells[(b * t_len + tp) * hd + j]);
                    dc_rec[b * hd + j] = dc * f_g;
                    dg[j] = dc * c_g * i_g * (F::one() - i_g);
                    dg[hd + j] = dc * c_prev * f_g * (F::one() - f_g);
                    dg[2 * hd + j] = dc * i_g * (F::one() - c_g * c_g);
                    dg[3 * hd + j] = d_o * o_g * (F::one() - o_g);
                }
            }
            if s > 0 {
                let dg_t = dims.at_time(&dgates, t, g4);
                gemm(F::one(), dg_t, MatRef::new(w_hh, hd, g4).t(), F::zero(), MatMut::new(&mut dh_rec, dims.batch, hd));
            }
        }

        let dx = needs[0].then(|| {
            let mut dx = vec![F::zero(); n * ind];
            matmul(false, true, n, g4, ind, F::one(), &dgates, w_ih, F::zero(), &mut dx);
            Tensor::from_vec(inputs[0].shape(), dx).expect("same shape")
        });
        let dw_ih = needs[1].then(|| {
            let mut d = vec![F::zero(); ind * g4];
            matmul(true, false, ind, n, g4, F::one(), x, &dgates, F::zero(), &mut d);
            Tensor::from_vec(inputs[1].shape(), d).expect("same shape")
        });
        let dw_hh = needs[2].then(|| {
            let mut h_prev = vec![F::zero(); n * hd];
            for s in 1..t_len {
                let (t, tp) = (dims.time(s), dims.time(s - 1));
                for b in 0..dims.batch {
                    let dst = (b * t_len + t) * hd;
                    let src = (b * t_len + tp) * hd;
                    h_prev[dst..dst + hd].copy_from_slice(&h[src..src + hd]);
                }
            }
            let mut d = vec![F::zero(); hd * g4];
            matmul(true, false, hd, n, g4, F::one(), &h_prev, &dgates, F::zero(), &mut d);
            Tensor::from_vec(inputs[2].shape(), d).expect("same shape")
        });
        let db = needs[3].then(|| {
            let mut d = vec![F::zero(); g4];
            for row in dgates.chunks_exact(g4) {
                for (acc, &v) in d.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            Tensor::from_vec(inputs[3].shape(), d).expect("same shape")
        });
        vec![dx, dw_ih, dw_hh, db]
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// Single-direction LSTM over `[batch * seq_len, input]` rows.
    ///
    /// Gate blocks are ordered input, forget, cell, output in the columns of
    /// `w_ih [input, 4h]`, `w_hh [h, 4h]` and `bias [4h]`. With `reverse`
    /// the sequence is consumed from the last step to the first; outputs
    /// stay aligned with their input time steps.
    pub fn lstm(&mut self, x: Var, w_ih: Var, w_hh: Var, bias: Var, seq_len: usize, reverse: bool) -> Result<Var> {
        let xv = self.value(x);
        let (ws, us) = (self.value(w_ih).shape().to_vec(), self.value(w_hh).shape().to_vec());
        if ws.len() != 2 || us.len() != 2 || ws[0] != xv.last_dim() || us[1] != ws[1] || ws[1] != 4 * us[0] {
            return Err(NnError::Shape(format!("lstm: input {:?}, w_ih {ws:?}, w_hh {us:?}", xv.shape())));
        }
        if self.value(bias).len() != ws[1] {
            return Err(NnError::Shape("lstm: bias length".into()));
        }
        if seq_len == 0 || xv.rows() % seq_len != 0 {
            return Err(NnError::Shape(format!("lstm: {} rows not a multiple of {seq_len}", xv.rows())));
        }
        let dims = LstmDims { batch: xv.rows() / seq_len, seq: seq_len, input: ws[0], hidden: us[0], reverse };
        let (n, hd) = (dims.batch * seq_len, dims.hidden);
        let g4 = 4 * hd;
        let (w_ih_d, w_hh_d, bias_d) = (self.value(w_ih).data(), self.value(w_hh).data(), self.value(bias).data());

        let mut acts = vec![F::zero(); n * g4];
        for row in acts.chunks_exact_mut(g4) {
            row.copy_from_slice(bias_d);
        }
        matmul(false, false, n, dims.input, g4, F::one(), xv.data(), w_ih_d, F::one(), &mut acts);
        let mut h = vec![F::zero(); n * hd];
        let mut cells = vec![F::zero(); n * hd];
        for s in 0..seq_len {
            let t = dims.time(s);
            let t_prev = (s > 0).then(|| dims.time(s - 1));
            if let Some(tp) = t_prev {
                let h_prev = dims.at_time(&h, tp, hd);
                gemm(F::one(), h_prev, MatRef::new(w_hh_d, hd, g4), F::one(), dims.at_time_mut(&mut acts, t, g4));
            }
            for b in 0..dims.batch {
                let row = b * seq_len + t;
                let a = &mut acts[row * g4..(row + 1) * g4];
                for j in 0..hd {
                    let i_g = sigmoid(a[j]);
                    let f_g = sigmoid(a[hd + j]);
                    let c_g = a[2 * hd + j].tanh();
                    let o_g = sigmoid(a[3 * hd + j]);
                    a[j] = i_g;
                    a[hd + j] = f_g;
                    a[2 * hd + j] = c_g;
                    a[3 * hd + j] = o_g;
                    let c_prev = t_prev.map_or(F::zero(), |tp| cells[(b * seq_len + tp) * hd + j]);
                    let c = f_g * c_prev + i_g * c_g;
                    cells[row * hd + j] = c;
                    h[row * hd + j] = o_g * c.tanh();
                }
            }
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().expect("non-empty") = hd;
        let y = Tensor::from_vec(&shape, h)?;
        Ok(self.push(y, &[x, w_ih, w_hh, bias], LstmBack { dims, acts, cells }))
    }
}
