//! Collect/update loop with curriculum progression and checkpointing.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, Transition};
use super::config::TrainConfig;
use super::ppo::{ppo_losses, LossStats, Minibatch};
use crate::env::{derive_seed, NavEnv};
use crate::error::{Error, Result};
use crate::net::model::ObsBatch;
use crate::net::policy::{obs_batch, sample_action};
use crate::net::{NetConfig, NetParams};
use crate::rewards::RewardConfig;
use crate::sim::{Event, Observation, ScenarioConfig, SimMode};
use crate::tensor::checkpoint;
use crate::tensor::{AdamState, Array};

/// One line of the training-curve log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Sum of rewards per agent over the iteration's rollout, averaged.
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy_loss: f64,
    /// Rolling success rate over the most recent goal attempts.
    pub success_rate: f64,
    pub stage: usize,
    pub transitions: usize,
    pub arrivals: usize,
    pub collisions: usize,
}

pub struct Trainer {
    pub params: NetParams<f32>,
    pub adam: AdamState<f32>,
    pub config: TrainConfig,
    pub base_scenario: ScenarioConfig,
    pub reward: RewardConfig,
    envs: Vec<NavEnv>,
    stage: usize,
    attempts: VecDeque<bool>,
    iteration: usize,
    action_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
}

fn scenario_for(base: &ScenarioConfig, cfg: &TrainConfig, stage: usize) -> ScenarioConfig {
    cfg.curriculum
        .stages
        .get(stage)
        .map_or_else(|| base.clone(), |p| p.apply(base))
}

impl Trainer {
    pub fn new(scenario: &ScenarioConfig, net: &NetConfig, train: &TrainConfig, reward: &RewardConfig) -> Result<Self> {
        train.validate()?;
        reward.validate()?;
        net.validate()?;
        scenario.validate()?;
        if scenario.lidar.n_laser != net.n_laser {
            return Err(Error::Config(format!(
                "scenario lidar has {} beams but the network expects {}",
                scenario.lidar.n_laser, net.n_laser
            )));
        }
        let params = NetParams::init(net, &mut ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 0)))?;
        let adam = AdamState::new(&params.values, train.adam);
        let mut t = Self {
            params,
            adam,
            config: train.clone(),
            base_scenario: scenario.clone(),
            reward: reward.clone(),
            envs: Vec::new(),
            stage: 0,
            attempts: VecDeque::new(),
            iteration: 0,
            action_rng: ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 1)),
            shuffle_rng: ChaCha8Rng::seed_from_u64(derive_seed(train.seed, 2)),
        };
        t.build_envs()?;
        Ok(t)
    }

    fn build_envs(&mut self) -> Result<()> {
        let sc = scenario_for(&self.base_scenario, &self.config, self.stage);
        self.envs = (0..self.config.envs)
            .map(|e| {
                let seed = derive_seed(self.config.seed, 1000 + 100 * self.stage as u64 + e as u64);
                NavEnv::new(&sc, &self.reward, SimMode::Train, self.params.config.stack, seed)
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn scenario(&self) -> ScenarioConfig {
        scenario_for(&self.base_scenario, &self.config, self.stage)
    }

    pub fn success_rate(&self) -> f64 {
        if self.attempts.is_empty() {
            0.0
        } else {
            self.attempts.iter().filter(|&&s| s).count() as f64 / self.attempts.len() as f64
        }
    }

    fn record_attempt(&mut self, success: bool) {
        self.attempts.push_back(success);
        while self.attempts.len() > self.config.curriculum.window {
            self.attempts.pop_front();
        }
    }

    /// Run the frozen policy for `horizon` decisions in every world.
    pub fn collect(&mut self) -> Result<(RolloutBuffer, usize, usize)> {
        let agents = self.envs.first().map_or(0, NavEnv::agent_count);
        let mut buffer = RolloutBuffer::new(self.envs.len() * agents);
        let (mut arrivals, mut collisions) = (0, 0);
        for env in &mut self.envs {
            env.world.reset_collision_counts();
        }
        for step in 0..self.config.horizon {
            let obs: Vec<Observation> = self
                .envs
                .iter()
                .flat_map(|e| {
                    e.observations()
                        .into_iter()
                        .map(|o| o.expect("training agents stay active"))
                })
                .collect();
            let refs: Vec<&Observation> = obs.iter().collect();
            let out = self.params.infer_observations(&refs)?;
            let mut samples = Vec::with_capacity(out.len());
            for o in &out {
                let s = sample_action(o, &mut self.action_rng, false);
                if !(s.raw[0].is_finite() && s.raw[1].is_finite()) {
                    return Err(Error::Numeric(format!("non-finite action at rollout step {step}")));
                }
                samples.push(s);
            }
            let mut outcomes = Vec::new();
            for (e, env) in self.envs.iter_mut().enumerate() {
                let actions: Vec<[f64; 2]> = (0..agents).map(|i| samples[e * agents + i].action).collect();
                let res = env.step(&actions)?;
                for i in 0..agents {
                    let k = e * agents + i;
                    buffer.streams[k].transitions.push(Transition {
                        obs: obs[k].clone(),
                        action: samples[k].raw,
                        logp: samples[k].logp,
                        reward: res.rewards[i].total,
                        done: res.dones[i],
                        value: out[k].value,
                    });
                    if res.dones[i] {
                        let ok = res.events[i] == Event::Arrived;
                        arrivals += ok as usize;
                        collisions += (res.events[i] == Event::Collided) as usize;
                        outcomes.push(ok);
                    }
                }
            }
            for ok in outcomes {
                self.record_attempt(ok);
            }
        }
        let last: Vec<Observation> = self
            .envs
            .iter()
            .flat_map(|e| e.observations().into_iter().flatten())
            .collect();
        let refs: Vec<&Observation> = last.iter().collect();
        let boot = self.params.infer_observations(&refs)?;
        for (s, b) in buffer.streams.iter_mut().zip(boot) {
            s.bootstrap = b.value;
        }
        Ok((buffer, arrivals, collisions))
    }

    /// K epochs of shuffled minibatch updates over `buffer`.
    pub fn update(&mut self, buffer: &RolloutBuffer) -> Result<LossStats> {
        let flat: Vec<(&Transition, f64, f64)> = buffer.flat().collect();
        let n = flat.len();
        if n == 0 {
            return Ok(LossStats::default());
        }
        let mut adv: Vec<f64> = flat.iter().map(|x| x.1).collect();
        if self.config.ppo.normalize_advantages && n > 1 {
            let mean = adv.iter().sum::<f64>() / n as f64;
            let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt().max(1e-8);
            for a in &mut adv {
                *a = (*a - mean) / std;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut sum = LossStats::default();
        let mut count = 0usize;
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut self.shuffle_rng);
            for (k, chunk) in order.chunks(self.config.minibatch).enumerate() {
                let mb = minibatch(&flat, &adv, chunk)?;
                let (stats, mut grads) = ppo_losses(
                    &self.params.values,
                    &self.params.layout,
                    &self.params.config,
                    &mb,
                    &self.config.ppo,
                )
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, minibatch {k}: {m}")),
                    other => other,
                })?;
                if let Some(max) = self.config.ppo.max_grad_norm {
                    grads.clip_global_norm(max);
                }
                self.adam.step(&mut self.params.values, &grads)?;
                self.params.clamp_log_sigma();
                sum.policy += stats.policy;
                sum.value += stats.value;
                sum.entropy += stats.entropy;
                sum.total += stats.total;
                count += 1;
            }
        }
        let c = count as f64;
        Ok(LossStats {
            policy: sum.policy / c,
            value: sum.value / c,
            entropy: sum.entropy / c,
            total: sum.total / c,
        })
    }

    /// One full collect/update cycle, advancing the curriculum afterwards.
    pub fn iterate(&mut self) -> Result<IterationStats> {
        let (mut buffer, arrivals, collisions) = self.collect()?;
        buffer.compute_advantages(self.config.gamma, self.config.lambda)?;
        let losses = self.update(&buffer)?;
        self.iteration += 1;
        let streams = buffer.streams.len().max(1);
        let stats = IterationStats {
            iteration: self.iteration,
            mean_reward: buffer.total_reward() / streams as f64,
            policy_loss: losses.policy,
            value_loss: losses.value,
            entropy_loss: losses.entropy,
            success_rate: self.success_rate(),
            stage: self.stage,
            transitions: buffer.len(),
            arrivals,
            collisions,
        };
        let cur = &self.config.curriculum;
        if self.stage + 1 < cur.stages.len()
            && self.attempts.len() >= cur.window
            && self.success_rate() >= cur.threshold
        {
            self.stage += 1;
            self.attempts.clear();
            self.build_envs()?;
        }
        Ok(stats)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.params.save(
            path,
            serde_json::json!({ "iteration": self.iteration, "stage": self.stage }),
        )
    }

    pub fn save_optimizer(&self, path: &Path) -> Result<()> {
        save_adam(path, &self.adam, &self.params.layout.names)
    }

    /// Train for the configured number of iterations. With `out`, writes
    /// `curves.jsonl` and checkpoints under `out/checkpoints/`.
    pub fn run(&mut self, out: Option<&Path>, mut on_iteration: impl FnMut(&IterationStats)) -> Result<TrainOutcome> {
        let ckpt_dir = out.map(|o| o.join("checkpoints"));
        let mut curve_file = match out {
            Some(o) => {
                std::fs::create_dir_all(o.join("checkpoints"))?;
                Some(std::io::BufWriter::new(std::fs::File::create(o.join("curves.jsonl"))?))
            }
            None => None,
        };
        let mut checkpoints = Vec::new();
        let mut save = |t: &Trainer, name: &str| -> Result<()> {
            if let Some(d) = &ckpt_dir {
                let p = d.join(format!("{name}.lstp"));
                t.save_checkpoint(&p)?;
                t.save_optimizer(&d.join(format!("{name}.adam")))?;
                checkpoints.push(p);
            }
            Ok(())
        };
        save(self, "iter_00000")?;
        let mut curves = Vec::with_capacity(self.config.iterations);
        for _ in 0..self.config.iterations {
            let stats = self.iterate()?;
            if let Some(f) = &mut curve_file {
                serde_json::to_writer(&mut *f, &stats)?;
                f.write_all(b"\n")?;
                f.flush()?;
            }
            on_iteration(&stats);
            let every = self.config.checkpoint_every;
            if every > 0 && self.iteration.is_multiple_of(every) {
                save(self, &format!("iter_{:05}", self.iteration))?;
            }
            curves.push(stats);
        }
        if self.iteration > 0 && (!self.iteration.is_multiple_of(self.config.checkpoint_every)) {
            save(self, &format!("iter_{:05}", self.iteration))?;
        }
        Ok(TrainOutcome { curves, checkpoints })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub curves: Vec<IterationStats>,
    pub checkpoints: Vec<PathBuf>,
}

fn minibatch(flat: &[(&Transition, f64, f64)], adv: &[f64], idx: &[usize]) -> Result<Minibatch<f32>> {
    let obs: Vec<&Observation> = idx.iter().map(|&i| &flat[i].0.obs).collect();
    let batch: ObsBatch<f32> = obs_batch(&obs)?;
    let b = idx.len();
    let col = |f: &dyn Fn(usize) -> f64| -> Result<Array<f32>> {
        Ok(Array::new(&[b], idx.iter().map(|&i| f(i) as f32).collect())?)
    };
    Ok(Minibatch {
        obs: batch,
        actions: Array::new(
            &[b, 2],
            idx.iter().flat_map(|&i| flat[i].0.action.map(|x| x as f32)).collect(),
        )?,
        old_logp: col(&|i| flat[i].0.logp)?,
        advantages: col(&|i| adv[i])?,
        returns: col(&|i| flat[i].2)?,
        old_values: col(&|i| flat[i].0.value)?,
    })
}

/// Store Adam moments alongside parameter names.
pub fn save_adam(path: &Path, adam: &AdamState<f32>, names: &[String]) -> Result<()> {
    let (m, v) = adam.moments();
    let labels: Vec<String> = names
        .iter()
        .flat_map(|n| [format!("m.{n}"), format!("v.{n}")])
        .collect();
    let tensors: Vec<(&str, &Array<f32>)> = labels
        .iter()
        .map(String::as_str)
        .zip(m.iter().zip(v).flat_map(|(a, b)| [a, b]))
        .collect();
    let meta = serde_json::json!({ "step": adam.step_count(), "adam": adam.config });
    checkpoint::save(path, "adam", &meta, &tensors)?;
    Ok(())
}

pub fn load_adam(path: &Path, names: &[String]) -> Result<AdamState<f32>> {
    let f = checkpoint::load::<f32>(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    if f.kind != "adam" {
        return Err(Error::Load(format!(
            "{} is not an optimizer state file",
            path.display()
        )));
    }
    let get = |k: &str| {
        f.get(k)
            .cloned()
            .ok_or_else(|| Error::Load(format!("optimizer state lacks {k}")))
    };
    let mut m = Vec::new();
    let mut v = Vec::new();
    for n in names {
        m.push(get(&format!("m.{n}"))?);
        v.push(get(&format!("v.{n}"))?);
    }
    let step = f.metadata.get("step").and_then(|s| s.as_u64()).unwrap_or(0);
    let config = serde_json::from_value(f.metadata.get("adam").cloned().unwrap_or_default())
        .map_err(|e| Error::Load(format!("optimizer config: {e}")))?;
    Ok(AdamState::from_parts(config, m, v, step)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (ScenarioConfig, NetConfig, TrainConfig) {
        let mut sc = ScenarioConfig::stage1();
        sc.lidar.n_laser = 8;
        let net = NetConfig {
            n_laser: 8,
            d_h: 8,
            heads: 2,
            enc_dim: 8,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..NetConfig::default()
        };
        let tc = TrainConfig {
            iterations: 2,
            horizon: 10,
            epochs: 1,
            minibatch: 64,
            ..TrainConfig::default()
        };
        (sc, net, tc)
    }

    #[test]
    fn buffer_holds_agents_times_horizon() {
        let (sc, net, tc) = small();
        let mut t = Trainer::new(&sc, &net, &tc, &RewardConfig::default()).unwrap();
        let (b, _, _) = t.collect().unwrap();
        assert_eq!(b.len(), 10);
    }

    #[test]
    fn identical_seeds_identical_curves() {
        let (sc, net, tc) = small();
        let a = Trainer::new(&sc, &net, &tc, &RewardConfig::default())
            .unwrap()
            .run(None, |_| {})
            .unwrap();
        let b = Trainer::new(&sc, &net, &tc, &RewardConfig::default())
            .unwrap()
            .run(None, |_| {})
            .unwrap();
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.curves.len(), 2);
    }

    #[test]
    fn one_minibatch_one_step() {
        let (sc, net, tc) = small();
        let mut t = Trainer::new(&sc, &net, &tc, &RewardConfig::default()).unwrap();
        t.iterate().unwrap();
        assert_eq!(t.adam.step_count(), 1);
    }

    #[test]
    fn optimizer_state_roundtrip() {
        let (sc, net, tc) = small();
        let mut t = Trainer::new(&sc, &net, &tc, &RewardConfig::default()).unwrap();
        t.iterate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("opt.adam");
        t.save_optimizer(&p).unwrap();
        let back = load_adam(&p, &t.params.layout.names).unwrap();
        assert_eq!(back, t.adam);
    }

    #[test]
    fn lidar_width_must_match_net() {
        let (mut sc, net, tc) = small();
        sc.lidar.n_laser = 9;
        assert!(matches!(
            Trainer::new(&sc, &net, &tc, &RewardConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
