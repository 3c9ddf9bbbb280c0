use crate::gemm::matmul;
use crate::graph::{Backward, Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

struct DepthwiseBack {
    seq_len: usize,
    channels: usize,
    kernel: usize,
}

impl<F: Scalar> Backward<F> for DepthwiseBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let (t_len, c, k_len) = (self.seq_len, self.channels, self.kernel);
        let pad = k_len / 2;
        let g = grad.data();
        let batches = g.len() / (t_len * c);
        let mut dx = vec![F::zero(); x.len()];
        let mut dw = vec![F::zero(); w.len()];
        let mut db = vec![F::zero(); c];
        for b in 0..batches {
            let off = b * t_len * c;
            for t in 0..t_len {
                let grow = &g[off + t * c..off + (t + 1) * c];
                for (acc, &v) in db.iter_mut().zip(grow) {
                    *acc += v;
                }
                for k in 0..k_len {
                    let Some(s) = (t + k).checked_sub(pad).filter(|&s| s < t_len) else { continue };
                    let xrow = &x[off + s * c..off + (s + 1) * c];
                    let wrow = &w[k * c..(k + 1) * c];
                    let dwrow = &mut dw[k * c..(k + 1) * c];
                    for j in 0..c {
                        dwrow[j] += grow[j] * xrow[j];
                    }
                    let dxrow = &mut dx[off + s * c..off + (s + 1) * c];
                    for j in 0..c {
                        dxrow[j] += grow[j] * wrow[j];
                    }
                }
            }
        }
        vec![
            needs[0].then(|| Tensor::from_vec(inputs[0].shape(), dx).expect("same shape")),
            needs[1].then(|| Tensor::from_vec(inputs[1].shape(), dw).expect("same shape")),
            needs[2].then(|| Tensor::from_vec(inputs[2].shape(), db).expect("same shape")),
        ]
    }
}

/// Geometry of a 2-D convolution with TensorFlow-style "same" padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub filters: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl Conv2dGeometry {
    pub fn out_h(&self) -> usize {
        self.in_h.div_ceil(self.stride_h)
    }

    pub fn out_w(&self) -> usize {
        self.in_w.div_ceil(self.stride_w)
    }

    fn pad_top(&self) -> usize {
        ((self.out_h() - 1) * self.stride_h + self.kernel_h).saturating_sub(self.in_h) / 2
    }

    fn pad_left(&self) -> usize {
        ((self.out_w() - 1) * self.stride_w + self.kernel_w).saturating_sub(self.in_w) / 2
    }

    fn patch(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_c
    }

    /// Visits every (output position, kernel tap) pair that lands inside
    /// the image, passing the column-matrix index and the image offset.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let (pt, pl) = (self.pad_top() as isize, self.pad_left() as isize);
        let c = self.in_c;
        for oy in 0..self.out_h() {
            for ox in 0..self.out_w() {
                let row = (oy * self.out_w() + ox) * self.patch();
                for ky in 0..self.kernel_h {
                    let iy = (oy * self.stride_h + ky) as isize - pt;
                    if iy < 0 || iy >= self.in_h as isize {
                        continue;
                    }
                    for kx in 0..self.kernel_w {
                        let ix = (ox * self.stride_w + kx) as isize - pl;
                        if ix < 0 || ix >= self.in_w as isize {
                            continue;
                        }
                        let col = row + (ky * self.kernel_w + kx) * c;
                        let img = (iy as usize * self.in_w + ix as usize) * c;
                        f(col, img);
                    }
                }
            }
        }
    }

    fn im2col<F: Scalar>(&self, image: &[F], cols: &mut [F]) {
        cols.iter_mut().for_each(|x| *x = F::zero());
        let c = self.in_c;
        self.for_each_tap(|col, img| cols[col..col + c].copy_from_slice(&image[img..img + c]));
    }

    fn col2im<F: Scalar>(&self, cols: &[F], image: &mut [F]) {
        let c = self.in_c;
        self.for_each_tap(|col, img| {
            for j in 0..c {
                image[img + j] += cols[col + j];
            }
        });
    }
}

struct Conv2dBack {
    geom: Conv2dGeometry,
    batch: usize,
}

impl<F: Scalar> Backward<F> for Conv2dBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, needs: &[bool]) -> Vec<Option<Tensor<F>>> {
        let geo = self.geom;
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let positions = geo.out_h() * geo.out_w();
        let (patch, f) = (geo.patch(), geo.filters);
        let in_size = geo.in_h * geo.in_w * geo.in_c;
        let g = grad.data();
        let mut cols = vec![F::zero(); positions * patch];
        let mut dcols = vec![F::zero(); positions * patch];
        let mut dx = needs[0].then(|| vec![F::zero(); x.len()]);
        let mut dw = vec![F::zero(); w.len()];
        let mut db = vec![F::zero(); f];
        for b in 0..self.batch {
            let gb = &g[b * positions * f..(b + 1) * positions * f];
            for row in gb.chunks_exact(f) {
                for (acc, &v) in db.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            if needs[1] {
                geo.im2col(&x[b * in_size..(b + 1) * in_size], &mut cols);
                matmul(true, false, patch, positions, f, F::one(), &cols, gb, F::one(), &mut dw);
            }
            if let Some(dx) = dx.as_mut() {
                matmul(false, true, positions, f, patch, F::one(), gb, w, F::zero(), &mut dcols);
                geo.col2im(&dcols, &mut dx[b * in_size..(b + 1) * in_size]);
            }
        }
        vec![
            dx.map(|d| Tensor::from_vec(inputs[0].shape(), d).expect("same shape")),
            needs[1].then(|| Tensor::from_vec(inputs[1].shape(), dw).expect("same shape")),
            needs[2].then(|| Tensor::from_vec(inputs[2].shape(), db).expect("same shape")),
        ]
    }
}

struct MaxPoolBack {
    argmax: Vec<usize>,
}

impl<F: Scalar> Backward<F> for MaxPoolBack {
    fn backward(&self, inputs: &[&Tensor<F>], _: &Tensor<F>, grad: &Tensor<F>, _: &[bool]) -> Vec<Option<Tensor<F>>> {
        let mut dx = Tensor::zeros(inputs[0].shape());
        let d = dx.data_mut();
        for (&src, &g) in self.argmax.iter().zip(grad.data()) {
            d[src] += g;
        }
        vec![Some(dx)]
    }
}

impl<'a, F: Scalar> Graph<'a, F> {
    /// Per-channel 1-D convolution along time with zero "same" padding.
    ///
    /// `x` is `[batch * seq_len, channels]`, `kernel` is `[k, channels]`
    /// with `k` odd, `bias` has `channels` entries.
    pub fn depthwise_conv1d(&mut self, x: Var, kernel: Var, bias: Var, seq_len: usize) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.last_dim();
        let ks = self.value(kernel).shape().to_vec();
        if ks.len() != 2 || ks[1] != c || ks[0] % 2 == 0 {
            return Err(NnError::Shape(format!("depthwise_conv1d: kernel {ks:?} for {c} channels (odd length required)")));
        }
        if self.value(bias).len() != c {
            return Err(NnError::Shape("depthwise_conv1d: bias length".into()));
        }
        if seq_len == 0 || xv.rows() % seq_len != 0 {
            return Err(NnError::Shape(format!("depthwise_conv1d: {} rows not a multiple of {seq_len}", xv.rows())));
        }
        let k_len = ks[0];
        let pad = k_len / 2;
        let (x_d, w, bias_d) = (xv.data(), self.value(kernel).data(), self.value(bias).data());
        let batches = xv.rows() / seq_len;
        let mut y = vec![F::zero(); xv.len()];
        for b in 0..batches {
            let off = b * seq_len * c;
            for t in 0..seq_len {
                let yrow = &mut y[off + t * c..off + (t + 1) * c];
                yrow.copy_from_slice(bias_d);
                for k in 0..k_len {
                    let Some(s) = (t + k).checked_sub(pad).filter(|&s| s < seq_len) else { continue };
                    let xrow = &x_d[off + s * c..off + (s + 1) * c];
                    let wrow = &w[k * c..(k + 1) * c];
                    for j in 0..c {
                        yrow[j] += wrow[j] * xrow[j];
                    }
                }
            }
        }
        let y = Tensor::from_vec(xv.shape(), y)?;
        Ok(self.push(y, &[x, kernel, bias], DepthwiseBack { seq_len, channels: c, kernel: k_len }))
    }

    /// 2-D convolution on NHWC input, kernel `[kh, kw, in_c, filters]`.
    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Var, stride: (usize, usize)) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ks = self.value(kernel).shape().to_vec();
        if xs.len() != 4 || ks.len() != 4 || ks[2] != xs[3] {
            return Err(NnError::Shape(format!("conv2d: input {xs:?} with kernel {ks:?}")));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(NnError::Shape("conv2d: zero stride".into()));
        }
        if self.value(bias).len() != ks[3] {
            return Err(NnError::Shape("conv2d: bias length".into()));
        }
        let geom = Conv2dGeometry {
            in_h: xs[1],
            in_w: xs[2],
            in_c: xs[3],
            kernel_h: ks[0],
            kernel_w: ks[1],
            filters: ks[3],
            stride_h: stride.0,
            stride_w: stride.1,
        };
        let batch = xs[0];
        let positions = geom.out_h() * geom.out_w();
        let in_size = geom.in_h * geom.in_w * geom.in_c;
        let f = geom.filters;
        let (x_d, w, bias_d) = (self.value(x).data(), self.value(kernel).data(), self.value(bias).data());
        let mut cols = vec![F::zero(); positions * geom.patch()];
        let mut y = vec![F::zero(); batch * positions * f];
        for b in 0..batch {
            geom.im2col(&x_d[b * in_size..(b + 1) * in_size], &mut cols);
            let yb = &mut y[b * positions * f..(b + 1) * positions * f];
            for row in yb.chunks_exact_mut(f) {
                row.copy_from_slice(bias_d);
            }
            matmul(false, false, positions, geom.patch(), f, F::one(), &cols, w, F::one(), yb);
        }
        let y = Tensor::from_vec(&[batch, geom.out_h(), geom.out_w(), f], y)?;
        Ok(self.push(y, &[x, kernel, bias], Conv2dBack { geom, batch }))
    }

    /// Non-overlapping 2×2 max pooling on NHWC input (odd edges dropped).
    pub fn max_pool2x2(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() != 4 || xs[1] < 2 || xs[2] < 2 {
            return Err(NnError::Shape(format!("max_pool2x2: input {xs:?}")));
        }
        let (b_n, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
        let (oh, ow) = (h / 2, w / 2);
        let xd = self.value(x).data();
        let mut y = Vec::with_capacity(b_n * oh * ow * c);
        let mut argmax = Vec::with_capacity(b_n * oh * ow * c);
        for b in 0..b_n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best = usize::MAX;
                        let mut best_v = F::neg_infinity();
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                                if best == usize::MAX || xd[i] > best_v {
                                    best = i;
                                    best_v = xd[i];
                                }
                            }
                        }
                        y.push(best_v);
                        argmax.push(best);
                    }
                }
            }
        }
        let y = Tensor::from_vec(&[b_n, oh, ow, c], y)?;
        Ok(self.push(y, &[x], MaxPoolBack { argmax }))
    }
}
