use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::net::{clamp_action, sample_action, NetParams};
use crate::sim::Observation;

/// Maps observations of the active agents to clamped `[v, ω]` commands.
pub trait Policy: Sync {
    fn name(&self) -> String;
    fn act(&self, obs: &[&Observation], rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>>;
}

/// The trained network, acting on its mean or on samples.
pub struct NetPolicy {
    pub label: String,
    pub params: NetParams<f32>,
    pub deterministic: bool,
}

impl NetPolicy {
    pub fn new(label: impl Into<String>, params: NetParams<f32>, deterministic: bool) -> Self {
        Self {
            label: label.into(),
            params,
            deterministic,
        }
    }
}

impl Policy for NetPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&self, obs: &[&Observation], rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>> {
        let out = self.params.infer_observations(obs)?;
        Ok(out
            .iter()
            .map(|o| sample_action(o, rng, self.deterministic).action)
            .collect())
    }
}

/// Never moves.
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn name(&self) -> String {
        "zero".into()
    }

    fn act(&self, obs: &[&Observation], _: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>> {
        Ok(vec![[0.0, 0.0]; obs.len()])
    }
}

/// Turns toward the goal and drives at `speed` once roughly aligned.
/// Ignores obstacles.
pub struct GoalSeeker {
    pub speed: f64,
    /// Proportional gain from bearing (rad) to turn rate (rad/s).
    pub gain: f64,
}

impl Default for GoalSeeker {
    fn default() -> Self {
        Self { speed: 1.0, gain: 4.0 }
    }
}

impl Policy for GoalSeeker {
    fn name(&self) -> String {
        "goal-seeker".into()
    }

    fn act(&self, obs: &[&Observation], _: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>> {
        Ok(obs
            .iter()
            .map(|o| {
                let bearing = o.goal[1] as f64 * PI;
                let v = if bearing.abs() < 0.3 { self.speed } else { 0.0 };
                clamp_action([v, self.gain * bearing])
            })
            .collect())
    }
}
