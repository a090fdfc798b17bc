//! Seeded evaluation trials, outcome classification, and aggregation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::env::{derive_seed, NavEnv};
use crate::error::{Error, Result};
use crate::rewards::RewardConfig;
use crate::sim::{AgentStatus, Layout, Observation, ScenarioConfig, SimMode, TrajectoryRecord, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_trials: usize,
    pub seed: u64,
    /// Act on the policy mean rather than on samples.
    pub deterministic: bool,
    /// Keep actuation and sensor noise on during evaluation.
    pub perturb: bool,
    /// Threads used to run trials.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_trials: 100,
            seed: 0,
            deterministic: true,
            perturb: false,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Reached the goal before the step limit without contact.
    Success,
    /// Touched an obstacle, wall, or another agent.
    Collision,
    /// Neither within the step limit.
    Trap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub agent: usize,
    pub outcome: Outcome,
    /// Physics steps until the outcome was decided.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub world_hash: u64,
    pub agents: Vec<AgentResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_trials: usize,
    /// Agent-trials; each agent in each trial is one sample.
    pub samples: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub trap_rate: f64,
    /// Mean steps over successful samples; absent without successes.
    pub average_steps: Option<f64>,
    pub trials: Vec<TrialRecord>,
}

impl Metrics {
    pub fn from_trials(mut trials: Vec<TrialRecord>) -> Self {
        trials.sort_by_key(|t| t.trial);
        let mut counts = [0usize; 3];
        let mut steps = 0u64;
        for r in trials.iter().flat_map(|t| &t.agents) {
            match r.outcome {
                Outcome::Success => {
                    counts[0] += 1;
                    steps += r.steps;
                }
                Outcome::Collision => counts[1] += 1,
                Outcome::Trap => counts[2] += 1,
            }
        }
        let samples: usize = counts.iter().sum();
        let frac = |c: usize| if samples == 0 { 0.0 } else { c as f64 / samples as f64 };
        Self {
            n_trials: trials.len(),
            samples,
            success_rate: frac(counts[0]),
            collision_rate: frac(counts[1]),
            trap_rate: frac(counts[2]),
            average_steps: (counts[0] > 0).then(|| steps as f64 / counts[0] as f64),
            trials,
        }
    }

    /// One-line machine-readable summary without per-trial records.
    pub fn summary(&self, policy: &str) -> serde_json::Value {
        serde_json::json!({
            "policy": policy,
            "n_trials": self.n_trials,
            "samples": self.samples,
            "sr": self.success_rate,
            "cr": self.collision_rate,
            "tr": self.trap_rate,
            "as": self.average_steps,
        })
    }
}

/// Seed of evaluation trial `k`; depends only on the base seed.
pub fn trial_seed(base: u64, k: usize) -> u64 {
    derive_seed(base ^ 0x5eed_e7a1, k as u64)
}

/// Evaluation world for one trial; never depends on the policy.
pub fn trial_world(scenario: &ScenarioConfig, cfg: &EvalConfig, seed: u64) -> Result<World> {
    Ok(World::generate(scenario, SimMode::Eval, seed)?.with_perturbations(cfg.perturb))
}

/// Run one trial; optionally record the trajectory.
pub fn run_trial(
    policy: &dyn Policy,
    scenario: &ScenarioConfig,
    reward: &RewardConfig,
    stack: usize,
    cfg: &EvalConfig,
    trial: usize,
    record: bool,
) -> Result<(TrialRecord, Vec<TrajectoryRecord>, Layout)> {
    let seed = trial_seed(cfg.seed, trial);
    let world = trial_world(scenario, cfg, seed)?;
    let hash = world.layout_hash();
    let layout = world.layout();
    let mut env = NavEnv::from_world(world, reward, stack, seed)?;
    if record {
        env.enable_log();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7));
    loop {
        let obs = env.observations();
        let active: Vec<usize> = (0..obs.len()).filter(|&i| obs[i].is_some()).collect();
        if active.is_empty() {
            break;
        }
        let refs: Vec<&Observation> = obs.iter().flatten().collect();
        let acts = policy.act(&refs, &mut rng)?;
        if acts.len() != refs.len() {
            return Err(Error::Contract(format!(
                "policy {} returned {} actions for {} observations",
                policy.name(),
                acts.len(),
                refs.len()
            )));
        }
        let mut full = vec![[0.0, 0.0]; obs.len()];
        for (&i, a) in active.iter().zip(acts) {
            full[i] = a;
        }
        if env.step(&full)?.episode_done {
            break;
        }
    }
    let agents = env
        .world
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let outcome = match a.status {
                AgentStatus::Arrived => Outcome::Success,
                AgentStatus::Collided => Outcome::Collision,
                AgentStatus::TimedOut | AgentStatus::Active => Outcome::Trap,
            };
            AgentResult {
                agent: i,
                outcome,
                steps: a.finished_at.unwrap_or(env.world.step),
            }
        })
        .collect();
    let log = env.take_log();
    Ok((
        TrialRecord {
            trial,
            seed,
            world_hash: hash,
            agents,
        },
        log,
        layout,
    ))
}

/// `cfg.n_trials` independent seeded trials, spread over `cfg.workers`
/// threads. Results do not depend on the worker count.
pub fn run_trials(
    policy: &dyn Policy,
    scenario: &ScenarioConfig,
    reward: &RewardConfig,
    stack: usize,
    cfg: &EvalConfig,
) -> Result<Metrics> {
    let workers = cfg.workers.clamp(1, cfg.n_trials.max(1));
    let run = |k: usize| run_trial(policy, scenario, reward, stack, cfg, k, false).map(|r| r.0);
    let trials: Vec<TrialRecord> = if workers == 1 {
        (0..cfg.n_trials).map(run).collect::<Result<_>>()?
    } else {
        let results = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run = &run;
                    s.spawn(move || (w..cfg.n_trials).step_by(workers).map(run).collect::<Result<Vec<_>>>())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Contract("evaluation worker panicked".into())))
                })
                .collect::<Vec<_>>()
        });
        let mut all = Vec::with_capacity(cfg.n_trials);
        for r in results {
            all.extend(r?);
        }
        all
    };
    Ok(Metrics::from_trials(trials))
}

/// Metrics for several policies on identical trial worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<(String, Metrics)>,
}

impl Comparison {
    /// Whether every row saw the same world in every trial.
    pub fn paired(&self) -> bool {
        let hashes = |m: &Metrics| m.trials.iter().map(|t| t.world_hash).collect::<Vec<_>>();
        self.rows.windows(2).all(|w| hashes(&w[0].1) == hashes(&w[1].1))
    }

    pub fn to_jsonl(&self) -> String {
        self.rows.iter().map(|(n, m)| m.summary(n).to_string() + "\n").collect()
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(6).max(6);
        let mut s = format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>9}  {:>7}\n",
            "policy", "SR", "CR", "TR", "AS", "samples"
        );
        for (n, m) in &self.rows {
            let avg = m.average_steps.map_or("-".to_string(), |a| format!("{a:.1}"));
            s += &format!(
                "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>9}  {:>7}\n",
                n, m.success_rate, m.collision_rate, m.trap_rate, avg, m.samples
            );
        }
        s
    }
}

pub fn compare_policies(
    policies: &[&dyn Policy],
    scenario: &ScenarioConfig,
    reward: &RewardConfig,
    stack: usize,
    cfg: &EvalConfig,
) -> Result<Comparison> {
    let rows = policies
        .iter()
        .map(|p| Ok((p.name(), run_trials(*p, scenario, reward, stack, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { rows })
}
