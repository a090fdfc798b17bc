use crate::error::{Error, Result};
use crate::sim::Observation;

/// One decision of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// Unclamped sample the log-probability refers to.
    pub action: [f64; 2],
    pub logp: f64,
    pub reward: f64,
    pub done: bool,
    pub value: f64,
}

/// Time-ordered transitions of one agent in one world.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stream {
    pub transitions: Vec<Transition>,
    /// Value of the observation following the last transition.
    pub bootstrap: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Per-stream rollouts collected during one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub streams: Vec<Stream>,
}

/// Generalized advantage estimation by the reverse recursion
/// `A_t = δ_t + γλ(1 − done_t) A_{t+1}` with
/// `δ_t = r_t + γ(1 − done_t) V_{t+1} − V_t`. Returns `(advantages, returns)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Contract(format!(
            "gae inputs differ in length: rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * keep * next_value - values[t];
        next_adv = delta + gamma * lambda * keep * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

impl RolloutBuffer {
    pub fn new(streams: usize) -> Self {
        Self {
            streams: vec![Stream::default(); streams],
        }
    }

    pub fn len(&self) -> usize {
        self.streams.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        for s in &mut self.streams {
            s.transitions.clear();
            s.advantages.clear();
            s.returns.clear();
            s.bootstrap = 0.0;
        }
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        for s in &mut self.streams {
            let r: Vec<f64> = s.transitions.iter().map(|t| t.reward).collect();
            let v: Vec<f64> = s.transitions.iter().map(|t| t.value).collect();
            let d: Vec<bool> = s.transitions.iter().map(|t| t.done).collect();
            let (a, ret) = compute_gae(&r, &v, &d, s.bootstrap, gamma, lambda)?;
            s.advantages = a;
            s.returns = ret;
        }
        Ok(())
    }

    /// Iterate `(transition, advantage, return)` over all streams in order.
    pub fn flat(&self) -> impl Iterator<Item = (&Transition, f64, f64)> {
        self.streams.iter().flat_map(|s| {
            s.transitions
                .iter()
                .zip(s.advantages.iter().copied().chain(std::iter::repeat(0.0)))
                .zip(s.returns.iter().copied().chain(std::iter::repeat(0.0)))
                .map(|((t, a), r)| (t, a, r))
        })
    }

    pub fn total_reward(&self) -> f64 {
        self.streams
            .iter()
            .flat_map(|s| s.transitions.iter().map(|t| t.reward))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_stay_zero() {
        let (a, r) = compute_gae(&[0.0; 4], &[0.0; 4], &[false; 4], 0.0, 0.99, 0.95).unwrap();
        assert!(a.iter().chain(&r).all(|&x| x == 0.0));
    }

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[1.0], &[0.5], &[true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![0.5]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn bootstrap_is_used_without_done() {
        let (a, _) = compute_gae(&[0.0], &[0.0], &[false], 2.0, 0.5, 1.0).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            compute_gae(&[0.0; 3], &[0.0; 2], &[false; 3], 0.0, 0.9, 0.9),
            Err(Error::Contract(_))
        ));
    }
}
