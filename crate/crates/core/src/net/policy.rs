use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::model::{forward, ObsBatch};
use super::params::NetParams;
use crate::error::{Error, Result};
use crate::sim::Observation;
use crate::tensor::{Array, Graph, Real};

/// Commanded linear velocity bounds (m/s).
pub const V_RANGE: (f64, f64) = (0.0, 1.0);
/// Commanded angular velocity bounds (rad/s).
pub const OMEGA_RANGE: (f64, f64) = (-PI, PI);

/// Gaussian policy parameters and value estimate for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    /// Clamped command `[v, ω]` sent to the simulator.
    pub action: [f64; 2],
    /// Unclamped Gaussian sample; the log-probability refers to this.
    pub raw: [f64; 2],
    pub logp: f64,
}

pub fn clamp_action(raw: [f64; 2]) -> [f64; 2] {
    [
        raw[0].clamp(V_RANGE.0, V_RANGE.1),
        raw[1].clamp(OMEGA_RANGE.0, OMEGA_RANGE.1),
    ]
}

/// Log-density of `x` under a diagonal Gaussian.
pub fn gaussian_log_prob(x: [f64; 2], mu: [f64; 2], sigma: [f64; 2]) -> f64 {
    (0..2)
        .map(|d| {
            let z = (x[d] - mu[d]) / sigma[d];
            -0.5 * z * z - sigma[d].ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn sample_action(out: &PolicyOutput, rng: &mut impl Rng, deterministic: bool) -> SampledAction {
    let raw = if deterministic {
        out.mu
    } else {
        let n0: f64 = StandardNormal.sample(rng);
        let n1: f64 = StandardNormal.sample(rng);
        [out.mu[0] + out.sigma[0] * n0, out.mu[1] + out.sigma[1] * n1]
    };
    SampledAction {
        action: clamp_action(raw),
        raw,
        logp: gaussian_log_prob(raw, out.mu, out.sigma),
    }
}

/// Pack observations into network input arrays.
pub fn obs_batch<T: Real>(obs: &[&Observation]) -> Result<ObsBatch<T>> {
    let first = obs
        .first()
        .ok_or_else(|| Error::Contract("empty observation batch".into()))?;
    let (stack, n) = (first.stack, first.n_laser);
    let mut scans = Vec::with_capacity(obs.len() * stack * n);
    let mut state = Vec::with_capacity(obs.len() * 4);
    for o in obs {
        if o.stack != stack || o.n_laser != n {
            return Err(Error::Contract("observations disagree in shape".into()));
        }
        scans.extend(o.scans.iter().map(|&x| T::from_f64(x as f64)));
        state.extend(o.state().iter().map(|&x| T::from_f64(x as f64)));
    }
    Ok(ObsBatch {
        scans: Array::new(&[obs.len(), stack, n], scans)?,
        state: Array::new(&[obs.len(), 4], state)?,
    })
}

impl<T: Real> NetParams<T> {
    /// Forward pass without gradient bookkeeping beyond the tape itself.
    pub fn infer(&self, batch: &ObsBatch<T>) -> Result<Vec<PolicyOutput>> {
        batch.check(&self.config)?;
        let mut g = Graph::new(&self.values);
        let scans = g.input(batch.scans.clone())?;
        let state = g.input(batch.state.clone())?;
        let f = forward(&mut g, &self.layout, &self.config, scans, state).map_err(|e| match e {
            Error::Tensor(crate::tensor::TensorError::Numeric(m)) => Error::Numeric(m),
            other => other,
        })?;
        let mu = g.value(f.mu).data();
        let value = g.value(f.value).data();
        let ls = g.value(f.log_sigma).data();
        let sigma = [ls[0].as_f64().exp(), ls[1].as_f64().exp()];
        Ok((0..batch.batch())
            .map(|b| PolicyOutput {
                mu: [mu[2 * b].as_f64(), mu[2 * b + 1].as_f64()],
                sigma,
                value: value[b].as_f64(),
            })
            .collect())
    }

    pub fn infer_observations(&self, obs: &[&Observation]) -> Result<Vec<PolicyOutput>> {
        self.infer(&obs_batch(obs)?)
    }
}
