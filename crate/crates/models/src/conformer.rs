use ultraspeech_nn::{relative_position_encoding, Graph, NnError, Scalar, Var};

use crate::spec::{ConformerBlockConfig, ModelKind, ModelSpec};
use crate::Result;

pub(crate) fn param<F: Scalar>(g: &mut Graph<'_, F>, name: &str) -> Result<Var> {
    let id = g.params().id(name).ok_or_else(|| NnError::UnknownParam(name.to_string()))?;
    Ok(g.param(id))
}

pub(crate) fn dense<F: Scalar>(g: &mut Graph<'_, F>, x: Var, name: &str, bias: bool) -> Result<Var> {
    let w = param(g, &format!("{name}.w"))?;
    let b = if bias { Some(param(g, &format!("{name}.b"))?) } else { None };
    Ok(g.linear(x, w, b)?)
}

fn layer_norm<F: Scalar>(g: &mut Graph<'_, F>, x: Var, name: &str) -> Result<Var> {
    let gamma = param(g, &format!("{name}.gamma"))?;
    let beta = param(g, &format!("{name}.beta"))?;
    Ok(g.layer_norm(x, gamma, beta)?)
}

fn feed_forward<F: Scalar>(g: &mut Graph<'_, F>, x: Var, name: &str, dropout: f64) -> Result<Var> {
    let h = layer_norm(g, x, &format!("{name}.ln"))?;
    let h = dense(g, h, &format!("{name}.up"), true)?;
    let h = g.silu(h);
    let h = g.dropout(h, dropout);
    let h = dense(g, h, &format!("{name}.down"), true)?;
    Ok(g.dropout(h, dropout))
}

fn self_attention<F: Scalar>(g: &mut Graph<'_, F>, x: Var, cfg: &ConformerBlockConfig, seq_len: usize) -> Result<Var> {
    let h = layer_norm(g, x, "block.mhsa.ln")?;
    let q = dense(g, h, "block.mhsa.q", true)?;
    let k = dense(g, h, "block.mhsa.k", true)?;
    let v = dense(g, h, "block.mhsa.v", true)?;
    let table = g.constant(relative_position_encoding(seq_len, cfg.encoder_dim));
    let pos = dense(g, table, "block.mhsa.pos", false)?;
    let u_bias = param(g, "block.mhsa.pos_bias_u")?;
    let v_bias = param(g, "block.mhsa.pos_bias_v")?;
    let att = g.rel_attention(q, k, v, pos, u_bias, v_bias, cfg.attention_heads, seq_len)?;
    let out = dense(g, att, "block.mhsa.out", true)?;
    Ok(g.dropout(out, cfg.dropout))
}

fn convolution<F: Scalar>(g: &mut Graph<'_, F>, x: Var, cfg: &ConformerBlockConfig, seq_len: usize) -> Result<Var> {
    let h = layer_norm(g, x, "block.conv.ln")?;
    let h = dense(g, h, "block.conv.pw1", true)?;
    let h = g.glu(h)?;
    let kernel = param(g, "block.conv.dw.kernel")?;
    let bias = param(g, "block.conv.dw.bias")?;
    let h = g.depthwise_conv1d(h, kernel, bias, seq_len)?;
    let gamma = param(g, "block.conv.norm.gamma")?;
    let beta = param(g, "block.conv.norm.beta")?;
    let h = g.seq_norm(h, gamma, beta, seq_len)?;
    let h = g.silu(h);
    let h = dense(g, h, "block.conv.pw2", true)?;
    Ok(g.dropout(h, cfg.dropout))
}

/// One Conformer block over `[batch · seq_len, encoder_dim]` rows:
/// half-step feed-forward, relative-position self-attention, convolution
/// module, second half-step feed-forward, then layer normalization.
pub fn conformer_block<F: Scalar>(g: &mut Graph<'_, F>, x: Var, cfg: &ConformerBlockConfig, seq_len: usize) -> Result<Var> {
    let ff = feed_forward(g, x, "block.ffn1", cfg.dropout)?;
    let ff = g.scale(ff, 0.5);
    let z1 = g.add(x, ff)?;
    let att = self_attention(g, z1, cfg, seq_len)?;
    let z2 = g.add(z1, att)?;
    let conv = convolution(g, z2, cfg, seq_len)?;
    let z3 = g.add(z2, conv)?;
    let ff = feed_forward(g, z3, "block.ffn2", cfg.dropout)?;
    let ff = g.scale(ff, 0.5);
    let z4 = g.add(z3, ff)?;
    layer_norm(g, z4, "block.final_ln")
}

fn bilstm_stack<F: Scalar>(g: &mut Graph<'_, F>, mut x: Var, seq_len: usize) -> Result<Var> {
    for layer in 1..=2 {
        let mut outs = [x; 2];
        for (i, (dir, reverse)) in [("fw", false), ("bw", true)].into_iter().enumerate() {
            let name = format!("lstm{layer}.{dir}");
            let w_ih = param(g, &format!("{name}.w_ih"))?;
            let w_hh = param(g, &format!("{name}.w_hh"))?;
            let bias = param(g, &format!("{name}.bias"))?;
            outs[i] = g.lstm(x, w_ih, w_hh, bias, seq_len, reverse)?;
        }
        x = g.concat_last(outs[0], outs[1])?;
    }
    Ok(x)
}

/// `x` is `[batch, scanlines · samples_per_line]`; returns `[batch, output_dim]`.
pub(crate) fn conformer_forward<F: Scalar>(spec: &ModelSpec, g: &mut Graph<'_, F>, x: Var) -> Result<Var> {
    let batch = g.shape(x)[0];
    let steps = spec.scanlines;
    let x = g.reshape(x, &[batch * steps, spec.samples_per_line])?;
    let h = dense(g, x, "input", true)?;
    let mut h = conformer_block(g, h, &spec.block, steps)?;
    if spec.kind == ModelKind::ConformerBilstm {
        h = bilstm_stack(g, h, steps)?;
    }
    let h = dense(g, h, "post", true)?;
    let h = g.reshape(h, &[batch, steps * spec.block.encoder_dim])?;
    dense(g, h, "out", true)
}
