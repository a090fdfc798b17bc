//! World state, placement, kinematics, collision checks, and local replay.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::geometry::{dist, wall_distance, Footprint, Obstacle, ObstacleKind, Point};
use super::scenario::{AgentSpawn, Layout, ScenarioConfig};
use crate::error::{Error, Result};

/// Surface distance below which two bodies are in contact (m).
pub const CONTACT_DISTANCE: f64 = 0.01;
/// Centre-to-goal distance that counts as arrival (m).
pub const ARRIVAL_DISTANCE: f64 = 0.1;
/// Below this |ω| the pose is advanced along a straight line.
const STRAIGHT_OMEGA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Perturbations on, collisions trigger replay.
    Train,
    /// Perturbations off unless configured, collisions terminal.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Active,
    Arrived,
    Collided,
    TimedOut,
}

/// What happened to an agent during one physics step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    None,
    Collided,
    Arrived,
    TimedOut,
    Replayed,
    Respawned,
    NewGoal,
}

impl Event {
    pub fn name(self) -> &'static str {
        match self {
            Event::None => "none",
            Event::Collided => "collided",
            Event::Arrived => "arrived",
            Event::TimedOut => "timed_out",
            Event::Replayed => "replayed",
            Event::Respawned => "respawned",
            Event::NewGoal => "new_goal",
        }
    }
}

/// Pose plus commanded and effective velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: Point,
    pub heading: f64,
    pub v_cmd: f64,
    pub omega_cmd: f64,
    pub v_eff: f64,
    pub omega_eff: f64,
}

impl Kinematics {
    pub fn at(position: Point, heading: f64) -> Self {
        Self {
            position,
            heading,
            ..Self::default()
        }
    }
}

/// Exact unicycle motion over `dt` at constant `(v, ω)`.
pub fn integrate_pose(position: Point, heading: f64, v: f64, omega: f64, dt: f64) -> (Point, f64) {
    if omega.abs() < STRAIGHT_OMEGA {
        let (s, c) = heading.sin_cos();
        (
            [position[0] + v * dt * c, position[1] + v * dt * s],
            heading + omega * dt,
        )
    } else {
        let h1 = heading + omega * dt;
        let r = v / omega;
        (
            [
                position[0] + r * (h1.sin() - heading.sin()),
                position[1] - r * (h1.cos() - heading.cos()),
            ],
            h1,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub kinematics: Kinematics,
}

/// Bounded history of snapshots; the oldest entry is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRing {
    capacity: usize,
    entries: VecDeque<Snapshot>,
}

impl HistoryRing {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, s: Snapshot) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(s);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &Snapshot> {
        self.entries.iter()
    }

    pub fn latest(&self) -> Option<&Snapshot> {
        self.entries.back()
    }

    /// Snapshot `back` entries before the newest (or the oldest one held),
    /// dropping everything recorded after it.
    pub fn rewind(&mut self, back: usize) -> Option<Snapshot> {
        let idx = self.entries.len().checked_sub(1)?.saturating_sub(back);
        self.entries.truncate(idx + 1);
        self.entries.back().copied()
    }

    pub fn reset_to(&mut self, s: Snapshot) {
        self.entries.clear();
        self.entries.push_back(s);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub kinematics: Kinematics,
    pub goal: Point,
    pub radius: f64,
    pub collision_count: u32,
    pub status: AgentStatus,
    /// Set by a training-mode collision until the replay is applied.
    pub pending_replay: bool,
    /// Physics step at which the agent last left the active state.
    pub finished_at: Option<u64>,
}

impl AgentState {
    pub fn is_active(&self) -> bool {
        self.status == AgentStatus::Active
    }

    pub fn goal_distance(&self) -> f64 {
        dist(self.kinematics.position, self.goal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub statuses: Vec<AgentStatus>,
    pub events: Vec<Event>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplayOutcome {
    /// Rolled back to the snapshot taken at `step`.
    Restored {
        step: u64,
    },
    Respawned,
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: ScenarioConfig,
    pub mode: SimMode,
    pub obstacles: Vec<Obstacle>,
    pub agents: Vec<AgentState>,
    pub step: u64,
    footprints: Vec<Footprint>,
    histories: Vec<HistoryRing>,
    slip_std: f64,
    noise_std: f64,
    rng: ChaCha8Rng,
}

fn disc(center: Point, radius: f64) -> Footprint {
    Footprint::Circle { center, radius }
}

struct Placer<'a> {
    cfg: &'a ScenarioConfig,
    placed: Vec<Footprint>,
}

impl Placer<'_> {
    fn clear_of_walls(&self, f: &Footprint, gap: f64) -> bool {
        let (lo, hi) = f.bounds();
        lo[0] >= gap && lo[1] >= gap && hi[0] <= self.cfg.arena[0] - gap && hi[1] <= self.cfg.arena[1] - gap
    }

    fn clear_of_placed(&self, f: &Footprint) -> bool {
        self.placed.iter().all(|p| p.distance_to(f) >= self.cfg.clearance)
    }

    fn uniform_point(&self, rng: &mut impl Rng, margin: f64) -> Point {
        let [w, h] = self.cfg.arena;
        let span = |len: f64| {
            if len > 2.0 * margin {
                (margin, len - margin)
            } else {
                (0.0, len)
            }
        };
        let (x0, x1) = span(w);
        let (y0, y1) = span(h);
        [rng.random_range(x0..=x1), rng.random_range(y0..=y1)]
    }

    fn sample_obstacle(&mut self, rng: &mut impl Rng) -> Result<Obstacle> {
        for _ in 0..self.cfg.max_attempts {
            let kind = ObstacleKind::ALL[rng.random_range(0..ObstacleKind::ALL.len())];
            let position = self.uniform_point(rng, 0.5);
            let theta = rng.random_range(0.0..PI);
            let o = Obstacle { kind, position, theta };
            let f = o.footprint();
            if self.clear_of_walls(&f, 0.0) && (!self.cfg.separate_obstacles || self.clear_of_placed(&f)) {
                self.placed.push(f);
                return Ok(o);
            }
        }
        Err(Error::InfeasibleScenario(format!(
            "could not place obstacle {} within {} attempts",
            self.placed.len(),
            self.cfg.max_attempts
        )))
    }

    fn sample_disc(&mut self, rng: &mut impl Rng, what: &str, away_from: Option<Point>) -> Result<Point> {
        let r = self.cfg.agent_radius;
        for _ in 0..self.cfg.max_attempts {
            let p = self.uniform_point(rng, r + self.cfg.clearance);
            if let Some(q) = away_from {
                if dist(p, q) < self.cfg.min_goal_distance {
                    continue;
                }
            }
            let f = disc(p, r);
            if self.clear_of_walls(&f, self.cfg.clearance) && self.clear_of_placed(&f) {
                self.placed.push(f);
                return Ok(p);
            }
        }
        Err(Error::InfeasibleScenario(format!(
            "could not place {what} within {} attempts",
            self.cfg.max_attempts
        )))
    }
}

impl World {
    /// Build a world from `cfg`, either from its hand-authored layout or by
    /// rejection sampling. Everything is derived from `seed`.
    pub fn generate(cfg: &ScenarioConfig, mode: SimMode, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (obstacles, spawns) = match &cfg.layout {
            Some(layout) => {
                if layout.arena != cfg.arena {
                    return Err(Error::Config(format!(
                        "layout arena {:?} differs from scenario arena {:?}",
                        layout.arena, cfg.arena
                    )));
                }
                (layout.obstacles.clone(), layout.agents.clone())
            }
            None => {
                let mut placer = Placer {
                    cfg,
                    placed: Vec::new(),
                };
                let obstacles = (0..cfg.obstacles)
                    .map(|_| placer.sample_obstacle(&mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let mut spawns = Vec::with_capacity(cfg.agents);
                for i in 0..cfg.agents {
                    let start = placer.sample_disc(&mut rng, &format!("start of agent {i}"), None)?;
                    let goal = placer.sample_disc(&mut rng, &format!("goal of agent {i}"), Some(start))?;
                    let heading = rng.random_range(-PI..PI);
                    spawns.push(AgentSpawn { start, heading, goal });
                }
                (obstacles, spawns)
            }
        };
        Ok(Self::from_parts(cfg, mode, obstacles, &spawns, rng))
    }

    fn from_parts(
        cfg: &ScenarioConfig,
        mode: SimMode,
        obstacles: Vec<Obstacle>,
        spawns: &[AgentSpawn],
        rng: ChaCha8Rng,
    ) -> Self {
        let footprints = obstacles.iter().map(Obstacle::footprint).collect();
        let agents = spawns
            .iter()
            .map(|s| AgentState {
                kinematics: Kinematics::at(s.start, s.heading),
                goal: s.goal,
                radius: cfg.agent_radius,
                collision_count: 0,
                status: AgentStatus::Active,
                pending_replay: false,
                finished_at: None,
            })
            .collect::<Vec<_>>();
        let histories = agents
            .iter()
            .map(|a: &AgentState| {
                let mut h = HistoryRing::new(cfg.replay.horizon + 1);
                h.push(Snapshot {
                    step: 0,
                    kinematics: a.kinematics,
                });
                h
            })
            .collect();
        let (slip_std, noise_std) = match mode {
            SimMode::Train => (cfg.slip_std, cfg.lidar.noise_std),
            SimMode::Eval => (0.0, 0.0),
        };
        Self {
            config: cfg.clone(),
            mode,
            obstacles,
            agents,
            step: 0,
            footprints,
            histories,
            slip_std,
            noise_std,
            rng,
        }
    }

    /// Enable actuation and sensor noise in evaluation mode.
    pub fn with_perturbations(mut self, on: bool) -> Self {
        if on {
            self.slip_std = self.config.slip_std;
            self.noise_std = self.config.lidar.noise_std;
        } else {
            self.slip_std = 0.0;
            self.noise_std = 0.0;
        }
        self
    }

    pub fn slip_std(&self) -> f64 {
        self.slip_std
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn footprints(&self) -> &[Footprint] {
        &self.footprints
    }

    pub fn history(&self, agent: usize) -> &HistoryRing {
        &self.histories[agent]
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn layout(&self) -> Layout {
        Layout {
            arena: self.config.arena,
            obstacles: self.obstacles.clone(),
            agents: self
                .agents
                .iter()
                .zip(&self.histories)
                .map(|(a, h)| {
                    let first = h.entries().next().map_or(a.kinematics, |s| s.kinematics);
                    AgentSpawn {
                        start: first.position,
                        heading: first.heading,
                        goal: a.goal,
                    }
                })
                .collect(),
        }
    }

    /// FNV-1a digest of the static layout and the initial agent poses.
    pub fn layout_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.config.arena[0]);
        feed(self.config.arena[1]);
        for o in &self.obstacles {
            feed(o.kind as u8 as f64);
            feed(o.position[0]);
            feed(o.position[1]);
            feed(o.theta);
        }
        for a in self.layout().agents {
            feed(a.start[0]);
            feed(a.start[1]);
            feed(a.heading);
            feed(a.goal[0]);
            feed(a.goal[1]);
        }
        h
    }

    pub fn active_count(&self) -> usize {
        self.agents.iter().filter(|a| a.is_active()).count()
    }

    /// Smallest surface gap between agent `i` and any obstacle, wall, or
    /// other active agent.
    pub fn surface_distance(&self, i: usize) -> f64 {
        let a = &self.agents[i];
        let p = a.kinematics.position;
        let mut d = wall_distance(p, self.config.arena) - a.radius;
        for f in &self.footprints {
            d = d.min(f.signed_distance(p) - a.radius);
        }
        for (j, b) in self.agents.iter().enumerate() {
            if j != i && b.is_active() {
                d = d.min(dist(p, b.kinematics.position) - a.radius - b.radius);
            }
        }
        d
    }

    /// Advance one physics step. `actions` holds one clamped `[v, ω]` per
    /// agent; entries for inactive agents are ignored.
    pub fn step(&mut self, actions: &[[f64; 2]]) -> Result<Termination> {
        if actions.len() != self.agents.len() {
            return Err(Error::Contract(format!(
                "step expects {} actions, got {}",
                self.agents.len(),
                actions.len()
            )));
        }
        let slip = (self.slip_std > 0.0).then(|| Normal::new(0.0, self.slip_std).expect("finite std"));
        let dt = self.config.dt;
        for (a, &[v, omega]) in self.agents.iter_mut().zip(actions) {
            if !a.is_active() {
                continue;
            }
            if !(v.is_finite() && omega.is_finite()) {
                return Err(Error::Numeric(format!("non-finite action [{v}, {omega}]")));
            }
            let (eta_v, eta_w) = match &slip {
                Some(n) => (n.sample(&mut self.rng), n.sample(&mut self.rng)),
                None => (0.0, 0.0),
            };
            let k = &mut a.kinematics;
            k.v_cmd = v;
            k.omega_cmd = omega;
            k.v_eff = v * (1.0 + eta_v);
            k.omega_eff = omega * (1.0 + eta_w);
            let (p, h) = integrate_pose(k.position, k.heading, k.v_eff, k.omega_eff, dt);
            k.position = p;
            k.heading = h;
            a.pending_replay = false;
        }
        self.step += 1;
        let active: Vec<bool> = self.agents.iter().map(AgentState::is_active).collect();
        let term = self.check_termination();
        for (i, was_active) in active.into_iter().enumerate() {
            if was_active {
                let snap = Snapshot {
                    step: self.step,
                    kinematics: self.agents[i].kinematics,
                };
                self.histories[i].push(snap);
            }
        }
        Ok(term)
    }

    /// Classify every active agent: collision (surface gap below contact
    /// distance) wins over arrival; the step limit times out the rest.
    pub fn check_termination(&mut self) -> Termination {
        let n = self.agents.len();
        let mut events = vec![Event::None; n];
        let gaps: Vec<f64> = (0..n)
            .map(|i| {
                if self.agents[i].is_active() {
                    self.surface_distance(i)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        for (i, a) in self.agents.iter_mut().enumerate() {
            if !a.is_active() {
                continue;
            }
            if gaps[i] < CONTACT_DISTANCE {
                events[i] = Event::Collided;
                match self.mode {
                    SimMode::Eval => {
                        a.status = AgentStatus::Collided;
                        a.finished_at = Some(self.step);
                    }
                    SimMode::Train => a.pending_replay = true,
                }
            } else if a.goal_distance() < ARRIVAL_DISTANCE {
                events[i] = Event::Arrived;
                a.status = AgentStatus::Arrived;
                a.finished_at = Some(self.step);
            }
        }
        let limit = self.step >= self.config.episode_steps;
        if limit {
            for (a, e) in self.agents.iter_mut().zip(events.iter_mut()) {
                if a.is_active() && *e == Event::None {
                    a.status = AgentStatus::TimedOut;
                    a.finished_at = Some(self.step);
                    *e = Event::TimedOut;
                }
            }
        }
        Termination {
            statuses: self.agents.iter().map(|a| a.status).collect(),
            done: limit || self.agents.iter().all(|a| !a.is_active()),
            events,
        }
    }

    /// Roll a just-collided agent back along its own history, or respawn it
    /// once it has exceeded the per-iteration collision allowance.
    pub fn apply_replay(&mut self, i: usize) -> Result<ReplayOutcome> {
        let a = self
            .agents
            .get(i)
            .ok_or_else(|| Error::Contract(format!("no agent {i}")))?;
        if !a.pending_replay {
            return Err(Error::Contract(format!("agent {i} has not just collided")));
        }
        self.agents[i].collision_count += 1;
        self.agents[i].pending_replay = false;
        if self.agents[i].collision_count > self.config.replay.max_collisions {
            self.respawn(i)?;
            return Ok(ReplayOutcome::Respawned);
        }
        let snap = self.histories[i]
            .rewind(self.config.replay.horizon)
            .ok_or_else(|| Error::Contract(format!("agent {i} has no history")))?;
        self.agents[i].kinematics = snap.kinematics;
        Ok(ReplayOutcome::Restored { step: snap.step })
    }

    /// Placement state that treats every obstacle and every other active
    /// agent as occupied.
    fn occupied_except(&self, i: usize) -> Vec<Footprint> {
        let mut placed = self.footprints.clone();
        for (j, b) in self.agents.iter().enumerate() {
            if j != i && b.is_active() {
                placed.push(disc(b.kinematics.position, b.radius));
            }
        }
        placed
    }

    /// Move agent `i` to a uniformly drawn collision-free pose with zero
    /// velocity, keeping its goal.
    pub fn respawn(&mut self, i: usize) -> Result<()> {
        let goal = self.agents[i].goal;
        let mut placer = Placer {
            placed: self.occupied_except(i),
            cfg: &self.config,
        };
        let p = placer.sample_disc(&mut self.rng, &format!("respawn of agent {i}"), Some(goal))?;
        let heading = self.rng.random_range(-PI..PI);
        let a = &mut self.agents[i];
        a.kinematics = Kinematics::at(p, heading);
        a.status = AgentStatus::Active;
        a.pending_replay = false;
        self.histories[i].reset_to(Snapshot {
            step: self.step,
            kinematics: a.kinematics,
        });
        Ok(())
    }

    /// Draw a fresh goal for agent `i` and reactivate it.
    pub fn assign_new_goal(&mut self, i: usize) -> Result<()> {
        let pos = self.agents[i].kinematics.position;
        let mut placer = Placer {
            placed: self.occupied_except(i),
            cfg: &self.config,
        };
        let g = placer.sample_disc(&mut self.rng, &format!("new goal of agent {i}"), Some(pos))?;
        let a = &mut self.agents[i];
        a.goal = g;
        a.status = AgentStatus::Active;
        Ok(())
    }

    pub fn reset_collision_counts(&mut self) {
        for a in &mut self.agents {
            a.collision_count = 0;
        }
    }

    /// Apply Gaussian range noise (if enabled) and clamp to `[0, z_max]`.
    pub fn perturb_scan(&mut self, scan: &mut [f64]) {
        let z_max = self.config.lidar.z_max;
        if self.noise_std > 0.0 {
            let n = Normal::new(0.0, self.noise_std).expect("finite std");
            for z in scan.iter_mut() {
                *z = (*z + n.sample(&mut self.rng)).clamp(0.0, z_max);
            }
        }
    }

    /// Place an agent directly; intended for tests and scripted scenes.
    pub fn set_pose(&mut self, i: usize, position: Point, heading: f64) {
        self.agents[i].kinematics = Kinematics::at(position, heading);
        self.histories[i].reset_to(Snapshot {
            step: self.step,
            kinematics: self.agents[i].kinematics,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(agents: usize) -> ScenarioConfig {
        ScenarioConfig {
            arena: [8.0, 8.0],
            obstacles: 0,
            agents,
            ..ScenarioConfig::default()
        }
    }

    fn single(start: Point, heading: f64, goal: Point) -> ScenarioConfig {
        ScenarioConfig {
            arena: [8.0, 8.0],
            layout: Some(Layout {
                arena: [8.0, 8.0],
                obstacles: vec![],
                agents: vec![AgentSpawn { start, heading, goal }],
            }),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn straight_and_rotation() {
        let mut w = World::generate(&single([2.0, 2.0], 0.0, [6.0, 6.0]), SimMode::Eval, 0).unwrap();
        w.step(&[[1.0, 0.0]]).unwrap();
        let k = w.agents[0].kinematics;
        assert!((k.position[0] - (2.0 + 1.0 / 60.0)).abs() < 1e-15);
        assert_eq!(k.position[1], 2.0);
        w.step(&[[0.0, PI]]).unwrap();
        let k2 = w.agents[0].kinematics;
        assert_eq!(k2.position, k.position);
        assert!((k2.heading - PI / 60.0).abs() < 1e-15);
    }

    #[test]
    fn arc_matches_fine_euler() {
        let (p, h) = integrate_pose([1.0, 2.0], 0.4, 1.0, 1.0, 1.0 / 60.0);
        let (mut x, mut y, mut th) = (1.0f64, 2.0f64, 0.4f64);
        let sub = 1.0 / 60.0 / 1000.0;
        for _ in 0..1000 {
            // midpoint heading keeps the oracle second-order accurate
            let mid = th + 0.5 * sub;
            x += sub * mid.cos();
            y += sub * mid.sin();
            th += sub;
        }
        assert!((p[0] - x).abs() < 1e-6 && (p[1] - y).abs() < 1e-6);
        assert!((h - th).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic_and_spaced() {
        let cfg = ScenarioConfig::stage2();
        let a = World::generate(&cfg, SimMode::Train, 11).unwrap();
        let b = World::generate(&cfg, SimMode::Train, 11).unwrap();
        assert_eq!(a.layout(), b.layout());
        assert_eq!(a.layout_hash(), b.layout_hash());
        let c = World::generate(&cfg, SimMode::Train, 12).unwrap();
        assert_ne!(a.layout_hash(), c.layout_hash());
        for (i, ag) in a.agents.iter().enumerate() {
            assert!(a.surface_distance(i) >= 0.1 - 1e-12);
            assert!(dist(ag.kinematics.position, ag.goal) >= 1.0);
        }
    }

    #[test]
    fn empty_world_has_only_agent_and_goal() {
        let w = World::generate(&ScenarioConfig { agents: 1, ..open(1) }, SimMode::Eval, 3).unwrap();
        assert!(w.obstacles.is_empty());
        assert_eq!(w.agents.len(), 1);
    }

    #[test]
    fn infeasible_density_is_reported() {
        let cfg = ScenarioConfig {
            arena: [3.0, 3.0],
            obstacles: 40,
            separate_obstacles: true,
            max_attempts: 200,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            World::generate(&cfg, SimMode::Train, 0),
            Err(Error::InfeasibleScenario(_))
        ));
    }

    #[test]
    fn arrival_and_timeout() {
        let mut w = World::generate(&single([4.0, 4.0], 0.0, [4.05, 4.0]), SimMode::Eval, 0).unwrap();
        let t = w.check_termination();
        assert_eq!(t.statuses, vec![AgentStatus::Arrived]);
        assert!(t.done);

        let mut w = World::generate(&single([4.0, 4.0], 0.0, [4.15, 4.0]), SimMode::Eval, 0).unwrap();
        assert_eq!(w.check_termination().statuses, vec![AgentStatus::Active]);
        w.step = 2499;
        let t = w.step(&[[0.0, 0.0]]).unwrap();
        assert_eq!(t.statuses, vec![AgentStatus::TimedOut]);
        assert!(t.done);
    }

    #[test]
    fn eval_collision_is_terminal() {
        let mut w = World::generate(&single([0.2, 4.0], PI, [4.0, 4.0]), SimMode::Eval, 0).unwrap();
        let mut t = w.step(&[[1.0, 0.0]]).unwrap();
        while !t.done {
            t = w.step(&[[1.0, 0.0]]).unwrap();
        }
        assert_eq!(t.statuses, vec![AgentStatus::Collided]);
        let x = w.agents[0].kinematics.position[0];
        assert!(x > 0.105 - 1.0 / 60.0 && x < 0.105 + 0.01);
    }

    #[test]
    fn replay_rolls_back_horizon() {
        let mut w = World::generate(&single([1.0, 4.0], 0.0, [7.5, 7.5]), SimMode::Train, 0).unwrap();
        w.slip_std = 0.0;
        let mut recorded = vec![w.agents[0].kinematics];
        for _ in 0..50 {
            w.step(&[[0.1, 0.0]]).unwrap();
            recorded.push(w.agents[0].kinematics);
        }
        w.agents[0].pending_replay = true;
        assert_eq!(w.apply_replay(0).unwrap(), ReplayOutcome::Restored { step: 0 });
        assert_eq!(w.agents[0].kinematics, recorded[0]);
        assert!(matches!(w.apply_replay(0), Err(Error::Contract(_))));
    }

    #[test]
    fn respawn_after_too_many_collisions() {
        let mut w = World::generate(&open(2), SimMode::Train, 5).unwrap();
        let other = w.agents[1].clone();
        for k in 0..4 {
            w.agents[0].pending_replay = true;
            let out = w.apply_replay(0).unwrap();
            assert_eq!(matches!(out, ReplayOutcome::Respawned), k == 3);
        }
        assert_eq!(w.agents[1], other);
        assert!(w.surface_distance(0) >= 0.1);
    }

    #[test]
    fn history_ring_evicts_oldest() {
        let mut h = HistoryRing::new(3);
        for s in 0..5 {
            h.push(Snapshot {
                step: s,
                kinematics: Kinematics::default(),
            });
        }
        assert_eq!(h.len(), 3);
        assert_eq!(h.entries().map(|s| s.step).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(h.rewind(1).unwrap().step, 3);
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn action_count_contract() {
        let mut w = World::generate(&open(2), SimMode::Eval, 1).unwrap();
        assert!(matches!(w.step(&[[0.0, 0.0]]), Err(Error::Contract(_))));
    }
}
