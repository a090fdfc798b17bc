//! Graph construction for the policy/value network.
//!
//! Every function appends nodes to a caller-supplied [`Graph`] so the same
//! code serves inference (values only) and training (values + backward).

use super::config::NetConfig;
use super::params::ParamLayout;
use crate::error::{Error, Result};
use crate::tensor::{Array, Graph, Real, Var};

/// Network inputs for a batch of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsBatch<T> {
    /// `[B, stack, n_laser]`, ranges divided by the sensor cap.
    pub scans: Array<T>,
    /// `[B, 4]`: normalized goal distance, goal bearing, v, ω.
    pub state: Array<T>,
}

impl<T: Real> ObsBatch<T> {
    pub fn batch(&self) -> usize {
        self.state.shape()[0]
    }

    pub fn check(&self, cfg: &NetConfig) -> Result<()> {
        let s = self.scans.shape();
        let b = self.state.shape();
        if s.len() != 3 || s[1] != cfg.stack || s[2] != cfg.n_laser || b.len() != 2 || b[1] != 4 || b[0] != s[0] {
            return Err(Error::Tensor(crate::tensor::TensorError::Dimension(format!(
                "observation batch scans {s:?}, state {b:?} for stack={} n_laser={}",
                cfg.stack, cfg.n_laser
            ))));
        }
        Ok(())
    }
}

/// Nodes produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    /// `[B, 2]` pre-squash action mean.
    pub mu: Var,
    /// `[B, 1]` state value.
    pub value: Var,
    /// `[2]` log standard deviation.
    pub log_sigma: Var,
    /// `[B, d_h]` temporal context.
    pub context: Var,
    /// `[B, enc_dim]` goal/velocity encoding.
    pub encoded: Var,
    /// Per-head attention weights `[B, 1, stack]` (empty for the GRU variant).
    pub attention_weights: Vec<Var>,
}

fn dense<T: Real>(g: &mut Graph<'_, T>, x: Var, w: usize, b: usize) -> Result<Var> {
    let w = g.param(w)?;
    let b = g.param(b)?;
    let y = g.matmul(x, w)?;
    Ok(g.add(y, b)?)
}

/// Stacked GRU over `seq: [B, T, n_laser]` from a zero state; returns the
/// top layer's hidden states `[B, T, d_h]`.
///
/// Gates follow r, z, n ordering:
/// `n = tanh(W_n x + b_in + r ⊙ (U_n h + b_hn))`, `h' = (1 - z) ⊙ n + z ⊙ h`.
pub fn gru_forward<T: Real>(g: &mut Graph<'_, T>, layout: &ParamLayout, cfg: &NetConfig, seq: Var) -> Result<Var> {
    let shape = g.shape(seq).to_vec();
    if shape.len() != 3 {
        return Err(Error::Tensor(crate::tensor::TensorError::Dimension(format!(
            "gru input must be [B, T, n], got {shape:?}"
        ))));
    }
    let (batch, steps) = (shape[0], shape[1]);
    let d = cfg.d_h;
    let mut input = seq;
    for slots in &layout.gru {
        let projected = dense(g, input, slots.w_ih, slots.b_ih)?;
        let w_hh = g.param(slots.w_hh)?;
        let b_hh = g.param(slots.b_hh)?;
        let mut h = g.input(Array::zeros(&[batch, d]))?;
        let mut outputs = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = g.slice(projected, 1, t, t + 1)?;
            let xt = g.reshape(xt, &[batch, 3 * d])?;
            let hw = g.matmul(h, w_hh)?;
            let hw = g.add(hw, b_hh)?;
            let (xr, xz, xn) = (
                g.slice(xt, 1, 0, d)?,
                g.slice(xt, 1, d, 2 * d)?,
                g.slice(xt, 1, 2 * d, 3 * d)?,
            );
            let (hr, hz, hn) = (
                g.slice(hw, 1, 0, d)?,
                g.slice(hw, 1, d, 2 * d)?,
                g.slice(hw, 1, 2 * d, 3 * d)?,
            );
            let r = g.add(xr, hr)?;
            let r = g.sigmoid(r)?;
            let z = g.add(xz, hz)?;
            let z = g.sigmoid(z)?;
            let rh = g.mul(r, hn)?;
            let n = g.add(xn, rh)?;
            let n = g.tanh(n)?;
            // h' = n + z ⊙ (h - n)
            let diff = g.sub(h, n)?;
            let zd = g.mul(z, diff)?;
            h = g.add(n, zd)?;
            outputs.push(g.reshape(h, &[batch, 1, d])?);
        }
        input = g.concat(&outputs, 1)?;
    }
    Ok(input)
}

/// Per-frame `ELU(x W + b)` used by the linear ablation.
pub fn linear_frames<T: Real>(g: &mut Graph<'_, T>, layout: &ParamLayout, seq: Var) -> Result<Var> {
    let slots = layout
        .linear
        .ok_or_else(|| Error::Contract("layout has no linear frame encoder".into()))?;
    let y = dense(g, seq, slots.w, slots.b)?;
    Ok(g.elu(y)?)
}

/// Multi-head attention with the last frame as the query and all frames
/// as keys/values. Returns the context `[B, d_h]` and per-head weights.
pub fn attention<T: Real>(
    g: &mut Graph<'_, T>,
    layout: &ParamLayout,
    cfg: &NetConfig,
    h: Var,
) -> Result<(Var, Vec<Var>)> {
    let slots = layout
        .attention
        .ok_or_else(|| Error::Contract("layout has no attention projections".into()))?;
    if !cfg.d_h.is_multiple_of(cfg.heads) {
        return Err(Error::Config(format!(
            "d_h={} is not divisible by heads={}",
            cfg.d_h, cfg.heads
        )));
    }
    let shape = g.shape(h).to_vec();
    let (batch, steps, d) = (shape[0], shape[1], shape[2]);
    let dk = d / cfg.heads;
    let w_q = g.param(slots.w_q)?;
    let w_k = g.param(slots.w_k)?;
    let w_v = g.param(slots.w_v)?;
    let w_o = g.param(slots.w_o)?;
    let last = g.slice(h, 1, steps - 1, steps)?;
    let q = g.matmul(last, w_q)?;
    let k = g.matmul(h, w_k)?;
    let v = g.matmul(h, w_v)?;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.heads);
    let mut weights = Vec::with_capacity(cfg.heads);
    for i in 0..cfg.heads {
        let span = (i * dk, (i + 1) * dk);
        let qi = g.slice(q, 2, span.0, span.1)?;
        let ki = g.slice(k, 2, span.0, span.1)?;
        let vi = g.slice(v, 2, span.0, span.1)?;
        let scores = g.bmm(qi, ki, true)?;
        let scores = g.scalar_mul(scores, scale)?;
        let w = g.softmax_last(scores)?;
        heads.push(g.bmm(w, vi, false)?);
        weights.push(w);
    }
    let cat = g.concat(&heads, 2)?;
    let cat = g.reshape(cat, &[batch, d])?;
    Ok((g.matmul(cat, w_o)?, weights))
}

/// Residual goal/velocity encoding `W_res (ELU(u) + u) + b_res` with
/// `u = W_enc x + b_enc`.
pub fn encode_state<T: Real>(g: &mut Graph<'_, T>, layout: &ParamLayout, state: Var) -> Result<Var> {
    let s = layout.encoder;
    let u = dense(g, state, s.w_enc, s.b_enc)?;
    let eu = g.elu(u)?;
    let sum = g.add(eu, u)?;
    dense(g, sum, s.w_res, s.b_res)
}

fn mlp_head<T: Real>(g: &mut Graph<'_, T>, layers: &[super::params::DenseSlots], x: Var) -> Result<Var> {
    let mut x = x;
    for (i, l) in layers.iter().enumerate() {
        x = dense(g, x, l.w, l.b)?;
        if i + 1 < layers.len() {
            x = g.elu(x)?;
        }
    }
    Ok(x)
}

/// Full forward pass: temporal context, state encoding, shared feature,
/// actor mean, and critic value.
pub fn forward<T: Real>(
    g: &mut Graph<'_, T>,
    layout: &ParamLayout,
    cfg: &NetConfig,
    scans: Var,
    state: Var,
) -> Result<ForwardVars> {
    let steps = g.shape(scans)[1];
    let batch = g.shape(scans)[0];
    let (context, attention_weights) = match cfg.variant {
        super::Variant::Lstp => {
            let h = gru_forward(g, layout, cfg, scans)?;
            attention(g, layout, cfg, h)?
        }
        super::Variant::Gru => {
            let h = gru_forward(g, layout, cfg, scans)?;
            let last = g.slice(h, 1, steps - 1, steps)?;
            (g.reshape(last, &[batch, cfg.d_h])?, Vec::new())
        }
        super::Variant::Linear => {
            let h = linear_frames(g, layout, scans)?;
            attention(g, layout, cfg, h)?
        }
    };
    let encoded = encode_state(g, layout, state)?;
    let data = g.concat(&[context, encoded], 1)?;
    let mu = mlp_head(g, &layout.actor, data)?;
    let value = mlp_head(g, &layout.critic, data)?;
    let log_sigma = g.param(layout.log_sigma)?;
    Ok(ForwardVars {
        mu,
        value,
        log_sigma,
        context,
        encoded,
        attention_weights,
    })
}
