//! Clipped-surrogate policy loss, clipped value loss, and entropy bonus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::model::{forward, ObsBatch};
use crate::net::params::ParamLayout;
use crate::net::NetConfig;
use crate::tensor::{Array, Gradients, Graph, Real, TensorError, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    /// Ratio clip radius ε.
    pub clip: f64,
    /// Value clip radius; the ratio clip radius is reused when absent.
    pub value_clip: Option<f64>,
    /// Value-loss weight α.
    pub value_coef: f64,
    /// Entropy weight β; negative values reward exploration.
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    /// Rescale gradients whose global norm exceeds this value.
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            value_clip: None,
            value_coef: 0.5,
            entropy_coef: -0.01,
            normalize_advantages: true,
            max_grad_norm: Some(0.5),
        }
    }
}

impl PpoConfig {
    pub fn value_clip_radius(&self) -> f64 {
        self.value_clip.unwrap_or(self.clip)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0) || !(self.value_clip_radius() > 0.0) {
            return Err(Error::Config("clip radii must be positive".into()));
        }
        if let Some(m) = self.max_grad_norm {
            if !(m > 0.0) {
                return Err(Error::Config("max_grad_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Training inputs for one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<T> {
    pub obs: ObsBatch<T>,
    /// `[B, 2]` unclamped actions taken during collection.
    pub actions: Array<T>,
    /// `[B]` log-probabilities under the collection policy.
    pub old_logp: Array<T>,
    /// `[B]` (already normalized if requested).
    pub advantages: Array<T>,
    /// `[B]` value targets.
    pub returns: Array<T>,
    /// `[B]` values predicted at collection time.
    pub old_values: Array<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
    pub total: Var,
    /// `[B]` per-sample clipped surrogate (before the sign flip and mean).
    pub surrogate: Var,
    pub ratio: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Append the loss computation for `mb` to `g`.
pub fn ppo_graph<T: Real>(
    g: &mut Graph<'_, T>,
    layout: &ParamLayout,
    net: &NetConfig,
    mb: &Minibatch<T>,
    cfg: &PpoConfig,
) -> Result<LossVars> {
    let b = mb.obs.batch();
    let scans = g.input(mb.obs.scans.clone())?;
    let state = g.input(mb.obs.state.clone())?;
    let f = forward(g, layout, net, scans, state)?;
    let actions = g.input(mb.actions.clone())?;
    let old_logp = g.input(mb.old_logp.clone())?;
    let adv = g.input(mb.advantages.clone())?;
    let ret = g.input(mb.returns.clone())?;
    let old_v = g.input(mb.old_values.clone())?;

    let logp = g.gaussian_log_prob(actions, f.mu, f.log_sigma)?;
    let diff = g.sub(logp, old_logp)?;
    let ratio = g.exp(diff)?;
    let s1 = g.mul(ratio, adv)?;
    let clipped = g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)?;
    let s2 = g.mul(clipped, adv)?;
    let surrogate = g.minimum(s1, s2)?;
    let mean_surr = g.reduce_mean(surrogate)?;
    let policy = g.scalar_mul(mean_surr, -1.0)?;

    let eps_v = cfg.value_clip_radius();
    let v = g.reshape(f.value, &[b])?;
    let err = g.sub(v, ret)?;
    let l1 = g.square(err)?;
    let dv = g.sub(v, old_v)?;
    let dv = g.clamp(dv, -eps_v, eps_v)?;
    let v_clip = g.add(old_v, dv)?;
    let err_c = g.sub(v_clip, ret)?;
    let l2 = g.square(err_c)?;
    let worst = g.maximum(l1, l2)?;
    let value = g.reduce_mean(worst)?;

    let entropy = g.gaussian_entropy(f.log_sigma)?;

    let wv = g.scalar_mul(value, cfg.value_coef)?;
    let we = g.scalar_mul(entropy, cfg.entropy_coef)?;
    let total = g.add(policy, wv)?;
    let total = g.add(total, we)?;
    Ok(LossVars {
        policy,
        value,
        entropy,
        total,
        surrogate,
        ratio,
    })
}

fn numeric(e: Error, context: &str) -> Error {
    match e {
        Error::Tensor(TensorError::Numeric(m)) | Error::Numeric(m) => Error::Numeric(format!("{context}: {m}")),
        other => other,
    }
}

/// Loss values and parameter gradients for one minibatch.
pub fn ppo_losses<T: Real>(
    params: &[Array<T>],
    layout: &ParamLayout,
    net: &NetConfig,
    mb: &Minibatch<T>,
    cfg: &PpoConfig,
) -> Result<(LossStats, Gradients<T>)> {
    let mut g = Graph::new(params);
    let vars = ppo_graph(&mut g, layout, net, mb, cfg).map_err(|e| numeric(e, "loss forward"))?;
    let stats = LossStats {
        policy: g.value(vars.policy).item().as_f64(),
        value: g.value(vars.value).item().as_f64(),
        entropy: g.value(vars.entropy).item().as_f64(),
        total: g.value(vars.total).item().as_f64(),
    };
    let grads = g.backward(vars.total).map_err(|e| numeric(e.into(), "loss backward"))?;
    Ok((stats, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> NetConfig {
        NetConfig {
            n_laser: 4,
            stack: 2,
            d_h: 4,
            gru_layers: 1,
            heads: 2,
            enc_dim: 4,
            actor_hidden: vec![4],
            critic_hidden: vec![4],
            ..NetConfig::default()
        }
    }

    fn batch(p: &NetParams<f64>, adv: &[f64], shift: f64) -> Minibatch<f64> {
        let b = adv.len();
        let obs = ObsBatch {
            scans: Array::filled(&[b, 2, 4], 0.5),
            state: Array::filled(&[b, 4], 0.1),
        };
        let out = p.infer(&obs).unwrap();
        let actions: Vec<f64> = out.iter().flat_map(|o| o.mu).collect();
        // at the mean, log π = −Σ ln(σ√(2π))
        let peak: f64 = out[0]
            .sigma
            .iter()
            .map(|s| -(s * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum();
        Minibatch {
            obs,
            actions: Array::new(&[b, 2], actions).unwrap(),
            old_logp: Array::filled(&[b], peak - shift),
            advantages: Array::new(&[b], adv.to_vec()).unwrap(),
            returns: Array::zeros(&[b]),
            old_values: Array::zeros(&[b]),
        }
    }

    #[test]
    fn unit_ratio_gives_minus_advantage() {
        let p = NetParams::<f64>::init(&tiny(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mb = batch(&p, &[1.5, -0.25, 0.0], 0.0);
        let mut g = Graph::new(&p.values);
        let v = ppo_graph(&mut g, &p.layout, &p.config, &mb, &PpoConfig::default()).unwrap();
        let s = g.value(v.surrogate).data();
        for (x, a) in s.iter().zip([1.5, -0.25, 0.0]) {
            assert!((-x - -a).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_branch() {
        let p = NetParams::<f64>::init(&tiny(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        // ratio = 1 + 2ε
        let mb = batch(&p, &[1.0], (1.4f64).ln());
        let mut g = Graph::new(&p.values);
        let v = ppo_graph(&mut g, &p.layout, &p.config, &mb, &PpoConfig::default()).unwrap();
        assert!((g.value(v.ratio).data()[0] - 1.4).abs() < 1e-12);
        assert!((g.value(v.policy).item() + 1.2).abs() < 1e-12);
        // the clipped branch carries no gradient back to the parameters
        let cfg = PpoConfig {
            value_coef: 0.0,
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        let (_, grads) = ppo_losses(&p.values, &p.layout, &p.config, &mb, &cfg).unwrap();
        assert_eq!(grads.global_norm(), 0.0);
    }

    #[test]
    fn unit_sigma_entropy() {
        let mut p = NetParams::<f64>::zeros(&tiny()).unwrap();
        p.get_mut("log_sigma").unwrap().data_mut().fill(0.0);
        let mb = batch(&p, &[0.0], 0.0);
        let (s, _) = ppo_losses(&p.values, &p.layout, &p.config, &mb, &PpoConfig::default()).unwrap();
        let closed = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((s.entropy - closed).abs() < 1e-12);
    }
}
