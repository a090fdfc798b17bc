use serde::{Deserialize, Serialize};

use super::{Array, Gradients, Real, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Array<T>>,
    v: Vec<Array<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Array<T>], config: AdamConfig) -> Self {
        Self {
            config,
            m: params.iter().map(|p| Array::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Array::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    /// Rebuild from stored moments, e.g. after loading a checkpoint.
    pub fn from_parts(config: AdamConfig, m: Vec<Array<T>>, v: Vec<Array<T>>, t: u64) -> Result<Self, TensorError> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(TensorError::Dimension(
                "first and second moments disagree in shape".into(),
            ));
        }
        Ok(Self { config, m, v, t })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[Array<T>], &[Array<T>]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [Array<T>], grads: &Gradients<T>) -> Result<(), TensorError> {
        let grads = grads.as_slice();
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(TensorError::Dimension(format!(
                "adam: {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(TensorError::Dimension(format!(
                    "adam slot {i}: param {:?}, grad {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    self.m[i].shape()
                )));
            }
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let step = T::from_f64(c.lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(c.eps);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((w, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mj = b1 * *mj + one_b1 * gj;
                *vj = b2 * *vj + one_b2 * gj * gj;
                *w = *w - step * *mj / ((*vj * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
