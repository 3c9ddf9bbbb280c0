use rand::Rng;

use crate::gemm::matmul;
use crate::graph::{Backward, Graph, Mode, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[inline]
pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

struct LinearBack {
    rows: usize,
    fan_in: usize,
    fan_out: usize,
}

impl<F: Scalar> Backward<F> for LinearBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (n, i, o) = (self.rows, self.fan_in, self.fan_out);
        let g = grad.data();
        let dx = needs[0].then(|| {
            let mut dx = Tensor::zeros(x.shape());
            matmul(false, true, n, o, i, F::one(), g, w.data(), F::zero(), dx.data_mut());
            dx
        });
        let dw = needs[1].then(|| {
            let mut dw = Tensor::zeros(w.shape());
            matmul(true, false, i, n, o, F::one(), x.data(), g, F::zero(), dw.data_mut());
            dw
        });
        let mut out = vec![dx, dw];
        if inputs.len() == 3 {
            out.push(needs[2].then(|| {
                let mut db = Tensor::zeros(&[o]);
                for row in g.chunks_exact(o) {
                    for (acc, &v) in db.data_mut().iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                db
            }));
        }
        out
    }
}

struct AddBack;

impl<F: Scalar> Backward<F> for AddBack {
    fn backward(&self, _: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        needs.iter().map(|&n| n.then(|| grad.clone())).collect()
    }
}

struct ScaleBack<F> {
    alpha: F,
}

impl<F: Scalar> Backward<F> for ScaleBack<F> {
    fn backward(&self, _: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        vec![Some(grad.map(|v| v * self.alpha))]
    }
}

struct SiluBack;

impl<F: Scalar> Backward<F> for SiluBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        let x = inputs[0];
        let mut dx = Tensor::zeros(x.shape());
        for ((d, &xv), &g) in dx.data_mut().iter_mut().zip(x.data()).zip(grad.data()) {
            let s = sigmoid(xv);
            *d = g * s * (F::one() + xv * (F::one() - s));
        }
        vec![Some(dx)]
    }
}

struct GluBack {
    half: usize,
}

impl<F: Scalar> Backward<F> for GluBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        let x = inputs[0];
        let c = self.half;
        let mut dx = Tensor::zeros(x.shape());
        for ((drow, xrow), grow) in dx.data_mut().chunks_exact_mut(2 * c).zip(x.data().chunks_exact(2 * c)).zip(grad.data().chunks_exact(c)) {
            let (da, db) = drow.split_at_mut(c);
            for j in 0..c {
                let a = xrow[j];
                let s = sigmoid(xrow[c + j]);
                da[j] = grow[j] * s;
                db[j] = grow[j] * a * s * (F::one() - s);
            }
        }
        vec![Some(dx)]
    }
}

struct MaskBack<F> {
    mask: Vec<F>,
}

impl<F: Scalar> Backward<F> for MaskBack<F> {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        let mut dx = Tensor::zeros(inputs[0].shape());
        for ((d, &g), &m) in dx.data_mut().iter_mut().zip(grad.data()).zip(&self.mask) {
            *d = g * m;
        }
        vec![Some(dx)]
    }
}

struct ReshapeBack {
    shape: Vec<usize>,
}

impl<F: Scalar> Backward<F> for ReshapeBack {
    fn backward(&self, _: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        vec![Some(grad.clone().reshaped(&self.shape).expect("same element count"))]
    }
}

struct ConcatBack {
    left: usize,
    right: usize,
}

impl<F: Scalar> Backward<F> for ConcatBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let w = self.left + self.right;
        let split = |offset: usize, width: usize, shape: &[usize]| {
            let mut d = Tensor::zeros(shape);
            for (drow, grow) in d.data_mut().chunks_exact_mut(width).zip(grad.data().chunks_exact(w)) {
                drow.copy_from_slice(&grow[offset..offset + width]);
            }
            d
        };
        vec![
            needs[0].then(|| split(0, self.left, inputs[0].shape())),
            needs[1].then(|| split(self.left, self.right, inputs[1].shape())),
        ]
    }
}

struct MseBack;

impl<F: Scalar> Backward<F> for MseBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let (p, t) = (inputs[0], inputs[1]);
        let scale = grad.data()[0] * F::of(2.0) / F::of(p.len() as f64);
        let diff: Vec<F> = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * scale).collect();
        let dp = Tensor::from_vec(p.shape(), diff).expect("same shape");
        let dt = needs[1].then(|| dp.map(|v| -v));
        vec![needs[0].then_some(dp), dt]
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// Affine map over the trailing axis: `x[..., in] · w[in, out] (+ b[out])`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.value(x), self.value(w));
        if ws.shape().len() != 2 || xs.last_dim() != ws.shape()[0] {
            return Err(NnError::Shape(format!("linear: input {:?} vs weight {:?}", xs.shape(), ws.shape())));
        }
        let (fan_in, fan_out) = (ws.shape()[0], ws.shape()[1]);
        let rows = xs.rows();
        let mut shape = xs.shape().to_vec();
        *shape.last_mut().expect("non-empty shape") = fan_out;
        let mut y = Tensor::zeros(&shape);
        if let Some(b) = b {
            let bs = self.value(b);
            if bs.len() != fan_out {
                return Err(NnError::Shape(format!("linear: bias {:?} for {fan_out} outputs", bs.shape())));
            }
            for row in y.data_mut().chunks_exact_mut(fan_out) {
                row.copy_from_slice(bs.data());
            }
        }
        let beta = if b.is_some() { F::one() } else { F::zero() };
        matmul(false, false, rows, fan_in, fan_out, F::one(), xs.data(), ws.data(), beta, y.data_mut());
        let rule = LinearBack { rows, fan_in, fan_out };
        Ok(match b {
            Some(b) => self.push(y, &[x, w, b], rule),
            None => self.push(y, &[x, w], rule),
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(NnError::Shape(format!("add: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let mut y = av.clone();
        y.add_assign(bv);
        Ok(self.push(y, &[a, b], AddBack))
    }

    pub fn scale(&mut self, x: Var, alpha: f64) -> Var {
        let alpha = F::of(alpha);
        let y = self.value(x).map(|v| v * alpha);
        self.push(y, &[x], ScaleBack { alpha })
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v * sigmoid(v));
        self.push(y, &[x], SiluBack)
    }

    /// Gated linear unit over the trailing axis: `a · sigmoid(b)` with `[a | b] = x`.
    pub fn glu(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = xv.last_dim();
        if d % 2 != 0 {
            return Err(NnError::Shape(format!("glu needs an even trailing axis, got {d}")));
        }
        let c = d / 2;
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().expect("non-empty") = c;
        let mut y = Tensor::zeros(&shape);
        for (yrow, xrow) in y.data_mut().chunks_exact_mut(c).zip(xv.data().chunks_exact(d)) {
            for j in 0..c {
                yrow[j] = xrow[j] * sigmoid(xrow[c + j]);
            }
        }
        Ok(self.push(y, &[x], GluBack { half: c }))
    }

    /// Inverted dropout; the identity outside [`Mode::Train`].
    pub fn dropout(&mut self, x: Var, rate: f64) -> Var {
        if self.mode() != Mode::Train || rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - rate;
        let scale = F::of(1.0 / keep);
        let n = self.value(x).len();
        let rng = self.rng();
        let mask: Vec<F> = (0..n).map(|_| if rng.random::<f64>() < keep { scale } else { F::zero() }).collect();
        let xv = self.value(x);
        let mut y = Tensor::zeros(xv.shape());
        for ((o, &v), &m) in y.data_mut().iter_mut().zip(xv.data()).zip(&mask) {
            *o = v * m;
        }
        self.push(y, &[x], MaskBack { mask })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let old = xv.shape().to_vec();
        let y = xv.clone().reshaped(shape)?;
        Ok(self.push(y, &[x], ReshapeBack { shape: old }))
    }

    /// Concatenates two tensors with equal row counts along the trailing axis.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(NnError::Shape(format!("concat: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let (l, r) = (av.last_dim(), bv.last_dim());
        let mut shape = av.shape().to_vec();
        *shape.last_mut().expect("non-empty") = l + r;
        let mut y = Tensor::zeros(&shape);
        for ((yrow, arow), brow) in y.data_mut().chunks_exact_mut(l + r).zip(av.data().chunks_exact(l)).zip(bv.data().chunks_exact(r)) {
            yrow[..l].copy_from_slice(arow);
            yrow[l..].copy_from_slice(brow);
        }
        Ok(self.push(y, &[a, b], ConcatBack { left: l, right: r }))
    }

    /// Mean squared error over every element.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.len() != t.len() || p.is_empty() {
            return Err(NnError::Shape(format!("mse: {:?} vs {:?}", p.shape(), t.shape())));
        }
        let sum: f64 = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
        let y = Tensor::scalar(F::of(sum / p.len() as f64));
        Ok(self.push(y, &[pred, target], MseBack))
    }
}
