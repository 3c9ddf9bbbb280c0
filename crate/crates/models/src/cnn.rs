use ultraspeech_nn::{Graph, Scalar, Var};

use crate::conformer::{dense, param};
use crate::spec::ModelSpec;
use crate::Result;

/// `x` is `[batch, scanlines · samples_per_line]`; returns `[batch, output_dim]`.
pub(crate) fn cnn_forward<F: Scalar>(spec: &ModelSpec, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
    let batch = g.shape(x)[0];
    let cfg = &spec.cnn;
    let mut h = g.reshape(x, &[batch, spec.scanlines, spec.samples_per_line, 1])?;
    for (i, &stride) in cfg.strides.iter().enumerate() {
        let kernel = param(g, &format!("conv{}.kernel", i + 1))?;
        let bias = param(g, &format!("conv{}.bias", i + 1))?;
        h = g.conv2d(h, kernel, bias, stride)?;
        h = g.silu(h);
        if cfg.pool_after[i] {
            h = g.max_pool2x2(h)?;
        }
    }
    let flat: usize = g.shape(h)[1..].iter().product();
    let h = g.reshape(h, &[batch, flat])?;
    let h = dense(g, h, "hidden", true)?;
    let h = g.silu(h);
    let h = g.dropout(h, cfg.dropout);
    dense(g, h, "out", true)
}
