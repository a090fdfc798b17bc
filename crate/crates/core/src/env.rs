//! Decision-level environment: repeats each policy command for a fixed
//! number of physics steps, maintains frame stacks, and scores the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::{RewardConfig, RewardFn, RewardParts};
use crate::sim::{
    lidar_scan, observe, AgentStatus, Event, FrameStack, Observation, ReplayOutcome, ScenarioConfig, SimMode,
    TrajectoryRecord, World,
};

/// SplitMix64 step, used to derive independent seeds from one base seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th derived stream of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Result of one decision for every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvStep {
    /// Whether the agent was active when the decision started.
    pub acted: Vec<bool>,
    pub rewards: Vec<RewardParts>,
    /// End of the agent's bootstrap segment (arrival, collision, timeout).
    pub dones: Vec<bool>,
    /// The most significant world event during the decision.
    pub events: Vec<Event>,
    /// All agents inactive or the step limit reached; in training mode the
    /// world has already been regenerated when this is set.
    pub episode_done: bool,
}

#[derive(Debug, Clone)]
pub struct NavEnv {
    pub world: World,
    pub reward: RewardFn,
    frames: Vec<FrameStack>,
    stack: usize,
    seed: u64,
    episodes: u64,
    log: Option<Vec<TrajectoryRecord>>,
}

fn event_rank(e: Event) -> u8 {
    match e {
        Event::None => 0,
        Event::NewGoal => 1,
        Event::Replayed | Event::Respawned => 2,
        Event::TimedOut => 3,
        Event::Arrived => 4,
        Event::Collided => 5,
    }
}

impl NavEnv {
    pub fn new(
        scenario: &ScenarioConfig,
        reward: &RewardConfig,
        mode: SimMode,
        stack: usize,
        seed: u64,
    ) -> Result<Self> {
        let world = World::generate(scenario, mode, seed)?;
        Self::from_world(world, reward, stack, seed)
    }

    /// Wrap an existing world (its perturbation settings are kept).
    pub fn from_world(world: World, reward: &RewardConfig, stack: usize, seed: u64) -> Result<Self> {
        let lidar = &world.config.lidar;
        let reward = RewardFn::new(
            reward.clone(),
            lidar.beam_angles(),
            lidar.z_max,
            world.config.decision_dt(),
        )?;
        let mut env = Self {
            frames: vec![FrameStack::new(stack); world.agents.len()],
            world,
            reward,
            stack,
            seed,
            episodes: 0,
            log: None,
        };
        env.reset_frames();
        Ok(env)
    }

    /// Start recording one trajectory record per agent and physics step.
    pub fn enable_log(&mut self) {
        let mut log = Vec::new();
        for (i, a) in self.world.agents.iter().enumerate() {
            let k = a.kinematics;
            log.push(TrajectoryRecord {
                step: self.world.step,
                agent: i,
                x: k.position[0],
                y: k.position[1],
                theta: k.heading,
                v: k.v_cmd,
                omega: k.omega_cmd,
                reward: 0.0,
                event: Event::None.name().into(),
            });
        }
        self.log = Some(log);
    }

    pub fn take_log(&mut self) -> Vec<TrajectoryRecord> {
        self.log.take().unwrap_or_default()
    }

    pub fn stack(&self) -> usize {
        self.stack
    }

    pub fn agent_count(&self) -> usize {
        self.world.agents.len()
    }

    fn sensed(&mut self, i: usize) -> Vec<f64> {
        let mut s = lidar_scan(&self.world, i);
        self.world.perturb_scan(&mut s);
        s
    }

    fn reset_frames(&mut self) {
        for i in 0..self.world.agents.len() {
            let s = self.sensed(i);
            self.frames[i].reset(&s);
        }
    }

    /// Observation for every agent that is currently active.
    pub fn observations(&self) -> Vec<Option<Observation>> {
        (0..self.world.agents.len())
            .map(|i| {
                self.world.agents[i]
                    .is_active()
                    .then(|| observe(&self.world, i, &self.frames[i]))
            })
            .collect()
    }

    pub fn observe(&self, i: usize) -> Observation {
        observe(&self.world, i, &self.frames[i])
    }

    fn regenerate(&mut self) -> Result<()> {
        self.episodes += 1;
        let seed = derive_seed(self.seed, self.episodes);
        let perturbed = self.world.slip_std() > 0.0 || self.world.noise_std() > 0.0;
        let mut world = World::generate(&self.world.config, self.world.mode, seed)?;
        if self.world.mode == SimMode::Eval {
            world = world.with_perturbations(perturbed);
        }
        self.world = world;
        self.reset_frames();
        Ok(())
    }

    /// Apply one command per agent (inactive entries are ignored) for the
    /// configured number of physics steps.
    pub fn step(&mut self, actions: &[[f64; 2]]) -> Result<EnvStep> {
        let n = self.world.agents.len();
        if actions.len() != n {
            return Err(Error::Contract(format!("expected {n} actions, got {}", actions.len())));
        }
        let training = self.world.mode == SimMode::Train;
        let acted: Vec<bool> = self.world.agents.iter().map(|a| a.is_active()).collect();
        let start: Vec<_> = self.world.agents.iter().map(|a| a.kinematics.position).collect();
        let goals: Vec<_> = self.world.agents.iter().map(|a| a.goal).collect();
        let mut collided = vec![false; n];
        let mut events = vec![Event::None; n];
        let mut commands = actions.to_vec();
        let mut limit_reached = false;
        for _ in 0..self.world.config.decision_steps {
            let term = self.world.step(&commands)?;
            for i in 0..n {
                let e = term.events[i];
                if event_rank(e) > event_rank(events[i]) {
                    events[i] = e;
                }
                if e == Event::Collided {
                    collided[i] = true;
                    if training {
                        // roll back now; the agent idles for the rest of the decision
                        self.world.apply_replay(i)?;
                        commands[i] = [0.0, 0.0];
                    }
                }
            }
            if let Some(log) = &mut self.log {
                for (i, a) in self.world.agents.iter().enumerate() {
                    if acted[i] && (a.is_active() || term.events[i] != Event::None) {
                        let k = a.kinematics;
                        log.push(TrajectoryRecord {
                            step: self.world.step,
                            agent: i,
                            x: k.position[0],
                            y: k.position[1],
                            theta: k.heading,
                            v: k.v_cmd,
                            omega: k.omega_cmd,
                            reward: 0.0,
                            event: term.events[i].name().into(),
                        });
                    }
                }
            }
            if term.done {
                limit_reached = self.world.step >= self.world.config.episode_steps;
                break;
            }
        }

        let mut rewards = vec![RewardParts::default(); n];
        let mut dones = vec![false; n];
        for i in 0..n {
            if !acted[i] {
                continue;
            }
            let a = &self.world.agents[i];
            let clean = lidar_scan(&self.world, i);
            let omega = actions[i][1];
            rewards[i] = self
                .reward
                .evaluate(start[i], a.kinematics.position, goals[i], &clean, omega, collided[i])?;
            let arrived = !collided[i] && a.status == AgentStatus::Arrived;
            dones[i] = collided[i] || arrived || a.status == AgentStatus::TimedOut;
            let mut scan = clean;
            self.world.perturb_scan(&mut scan);
            if collided[i] && training {
                self.frames[i].reset(&scan);
            } else {
                self.frames[i].push(scan);
            }
            if training && arrived {
                self.world.assign_new_goal(i)?;
            }
        }
        if let Some(log) = &mut self.log {
            // attach each decision's reward to the agent's last record
            for i in (0..n).filter(|&i| acted[i]) {
                if let Some(r) = log.iter_mut().rev().find(|r| r.agent == i) {
                    r.reward = rewards[i].total;
                    if events[i] != Event::None {
                        r.event = events[i].name().into();
                    }
                }
            }
        }
        let all_inactive = self.world.agents.iter().all(|a| !a.is_active());
        let episode_done = limit_reached || all_inactive;
        if training && episode_done {
            self.regenerate()?;
        }
        Ok(EnvStep {
            acted,
            rewards,
            dones,
            events,
            episode_done,
        })
    }

    /// Replay bookkeeping exposed for inspection tools.
    pub fn replay_now(&mut self, i: usize) -> Result<ReplayOutcome> {
        let out = self.world.apply_replay(i)?;
        let s = self.sensed(i);
        self.frames[i].reset(&s);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{AgentSpawn, Layout};

    fn lane(start: [f64; 2], goal: [f64; 2], mode: SimMode) -> NavEnv {
        let cfg = ScenarioConfig {
            arena: [8.0, 8.0],
            layout: Some(Layout {
                arena: [8.0, 8.0],
                obstacles: vec![],
                agents: vec![AgentSpawn {
                    start,
                    heading: 0.0,
                    goal,
                }],
            }),
            ..ScenarioConfig::default()
        };
        NavEnv::new(&cfg, &RewardConfig::default(), mode, 5, 1).unwrap()
    }

    #[test]
    fn progress_reward_over_a_decision() {
        let mut env = lane([1.0, 4.0], [6.0, 4.0], SimMode::Eval);
        let s = env.step(&[[1.0, 0.0]]).unwrap();
        // six physics steps at 1 m/s: 0.1 m closer
        assert!((s.rewards[0].goal - 0.25).abs() < 1e-12);
        assert!(!s.dones[0]);
    }

    #[test]
    fn eval_arrival_ends_episode() {
        let mut env = lane([1.0, 4.0], [2.205, 4.0], SimMode::Eval);
        let mut steps = 0;
        loop {
            let s = env.step(&[[1.0, 0.0]]).unwrap();
            steps += 1;
            if s.episode_done {
                assert_eq!(s.events[0], Event::Arrived);
                assert_eq!(s.rewards[0].goal, 20.0);
                break;
            }
            assert!(steps < 100);
        }
        // 1.105 m to close at 1/60 m per physics step
        assert_eq!(env.world.step, 67);
    }

    #[test]
    fn training_arrival_draws_new_goal() {
        let mut env = lane([1.0, 4.0], [1.6, 4.0], SimMode::Train);
        for _ in 0..20 {
            let s = env.step(&[[1.0, 0.0]]).unwrap();
            if s.dones[0] {
                assert!(env.world.agents[0].is_active());
                assert_ne!(env.world.agents[0].goal, [1.6, 4.0]);
                return;
            }
        }
        panic!("agent never arrived");
    }

    #[test]
    fn training_collision_replays() {
        let mut env = lane([7.0, 4.0], [1.0, 4.0], SimMode::Train);
        for _ in 0..30 {
            let s = env.step(&[[1.0, 0.0]]).unwrap();
            if s.events[0] == Event::Collided {
                assert!(s.dones[0]);
                assert_eq!(s.rewards[0].obstacle, -20.0);
                assert_eq!(env.world.agents[0].collision_count, 1);
                assert!(env.world.agents[0].kinematics.position[0] < 7.0 + 1e-9);
                return;
            }
        }
        panic!("no collision");
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
