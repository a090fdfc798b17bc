use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::{Obstacle, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarConfig {
    pub n_laser: usize,
    /// Maximum range (m); returns are capped here.
    pub z_max: f64,
    /// Angular span of the beam fan (rad), centred on the heading.
    pub fov: f64,
    /// Range noise standard deviation (m), applied in training mode.
    pub noise_std: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            n_laser: 130,
            z_max: 4.0,
            fov: 0.8 * PI,
            noise_std: 0.02,
        }
    }
}

impl LidarConfig {
    /// Beam angles relative to the heading. A full circle spaces `n` beams
    /// without duplicating the seam; a partial fan includes both edges.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.n_laser;
        if n == 1 {
            return vec![0.0];
        }
        if self.fov >= 2.0 * PI - 1e-9 {
            (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
        } else {
            (0..n)
                .map(|j| -self.fov / 2.0 + self.fov * j as f64 / (n - 1) as f64)
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    /// How many physics steps a colliding agent is rolled back.
    pub horizon: usize,
    /// Collisions per agent per iteration tolerated before a random respawn.
    pub max_collisions: u32,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            horizon: 300,
            max_collisions: 3,
        }
    }
}

/// Hand-placed start pose and goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpawn {
    pub start: Point,
    #[serde(default)]
    pub heading: f64,
    pub goal: Point,
}

/// Explicit world contents, used for hand-authored scenarios and for
/// exporting a generated world next to its trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub arena: Point,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub agents: Vec<AgentSpawn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Arena width and height (m); the boundary is a solid wall.
    pub arena: Point,
    pub obstacles: usize,
    pub agents: usize,
    pub agent_radius: f64,
    /// Physics step (s).
    pub dt: f64,
    /// Physics steps per policy decision.
    pub decision_steps: usize,
    /// Physics-step limit per episode.
    pub episode_steps: u64,
    /// Multiplicative actuation noise standard deviation.
    pub slip_std: f64,
    /// Minimum gap between agent starts, goals, and everything else (m).
    pub clearance: f64,
    /// Also keep obstacles `clearance` apart from each other. Off by default
    /// because the curriculum densities cannot be packed without overlap.
    pub separate_obstacles: bool,
    pub min_goal_distance: f64,
    /// Rejection-sampling attempts per entity.
    pub max_attempts: usize,
    pub lidar: LidarConfig,
    pub replay: ReplayConfig,
    /// Replaces random placement when present.
    pub layout: Option<Layout>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arena: [10.0, 10.0],
            obstacles: 35,
            agents: 10,
            agent_radius: 0.105,
            dt: 1.0 / 60.0,
            decision_steps: 6,
            episode_steps: 2500,
            slip_std: 0.05,
            clearance: 0.1,
            separate_obstacles: false,
            min_goal_distance: 1.0,
            max_attempts: 10_000,
            lidar: LidarConfig::default(),
            replay: ReplayConfig::default(),
            layout: None,
        }
    }
}

impl ScenarioConfig {
    /// First curriculum stage: one agent among five obstacles in 8×8 m.
    pub fn stage1() -> Self {
        Self {
            arena: [8.0, 8.0],
            obstacles: 5,
            agents: 1,
            ..Self::default()
        }
    }

    /// Second stage: thirty obstacles in the same area.
    pub fn stage2() -> Self {
        Self {
            obstacles: 30,
            ..Self::stage1()
        }
    }

    /// Multi-agent stage: ten agents and thirty-five obstacles.
    pub fn multi_agent() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.arena[0] > 0.0 && self.arena[1] > 0.0) {
            return bad(format!("arena extents must be positive, got {:?}", self.arena));
        }
        if self.agent_radius <= 0.0 || self.dt <= 0.0 {
            return bad("agent_radius and dt must be positive".into());
        }
        if self.decision_steps == 0 || self.episode_steps == 0 {
            return bad("decision_steps and episode_steps must be at least 1".into());
        }
        if self.slip_std < 0.0 || self.lidar.noise_std < 0.0 {
            return bad("noise levels must be non-negative".into());
        }
        if self.lidar.n_laser == 0
            || self.lidar.z_max <= 0.0
            || !(self.lidar.fov > 0.0)
            || self.lidar.fov > 2.0 * PI + 1e-9
        {
            return bad(format!(
                "lidar needs n_laser ≥ 1, z_max > 0 and 0 < fov ≤ 2π (got {:?})",
                self.lidar
            ));
        }
        if let Some(l) = &self.layout {
            if l.agents.is_empty() {
                return bad("a hand-authored layout needs at least one agent".into());
            }
        } else if self.agents == 0 {
            return bad("agents must be at least 1".into());
        }
        Ok(())
    }

    pub fn agent_count(&self) -> usize {
        self.layout.as_ref().map_or(self.agents, |l| l.agents.len())
    }

    /// Decision interval (s).
    pub fn decision_dt(&self) -> f64 {
        self.dt * self.decision_steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_fans() {
        let fan = LidarConfig {
            n_laser: 5,
            fov: PI,
            ..LidarConfig::default()
        };
        let a = fan.beam_angles();
        assert_eq!(a.len(), 5);
        assert!((a[0] + PI / 2.0).abs() < 1e-15 && (a[4] - PI / 2.0).abs() < 1e-15);
        assert_eq!(a[2], 0.0);
        let full = LidarConfig {
            n_laser: 4,
            fov: 2.0 * PI,
            ..LidarConfig::default()
        };
        let b = full.beam_angles();
        assert!((b[1] + PI / 2.0).abs() < 1e-15 && b[2] == 0.0);
    }

    #[test]
    fn layout_parses_from_toml() {
        let text = r#"
            arena = [6.0, 4.0]
            [[obstacles]]
            kind = "cube"
            position = [3.0, 2.0]
            theta = 0.3
            [[agents]]
            start = [1.0, 2.0]
            goal = [5.0, 2.0]
        "#;
        let l: Layout = toml::from_str(text).unwrap();
        assert_eq!(l.obstacles.len(), 1);
        assert_eq!(l.agents[0].heading, 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let c = ScenarioConfig {
            arena: [0.0, 5.0],
            ..ScenarioConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        ScenarioConfig::stage1().validate().unwrap();
    }
}
