use serde::{Deserialize, Serialize};

use super::ppo::PpoConfig;
use crate::error::{Error, Result};
use crate::sim::{Point, ScenarioConfig};
use crate::tensor::AdamConfig;

/// Scenario fields a curriculum stage may override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StagePatch {
    pub name: String,
    pub arena: Option<Point>,
    pub obstacles: Option<usize>,
    pub agents: Option<usize>,
}

impl StagePatch {
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut s = base.clone();
        if let Some(a) = self.arena {
            s.arena = a;
        }
        if let Some(o) = self.obstacles {
            s.obstacles = o;
        }
        if let Some(n) = self.agents {
            s.agents = n;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    /// Ordered stages; an empty list trains on the base scenario only.
    pub stages: Vec<StagePatch>,
    /// Rolling success rate that advances to the next stage.
    pub threshold: f64,
    /// Number of most recent goal attempts the success rate covers.
    pub window: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            stages: Vec::new(),
            threshold: 0.9,
            window: 100,
        }
    }
}

impl CurriculumConfig {
    /// Five obstacles, then thirty, then ten agents among thirty-five.
    pub fn three_stage() -> Self {
        Self {
            stages: vec![
                StagePatch {
                    name: "open".into(),
                    arena: Some([8.0, 8.0]),
                    obstacles: Some(5),
                    agents: Some(1),
                },
                StagePatch {
                    name: "dense".into(),
                    arena: Some([8.0, 8.0]),
                    obstacles: Some(30),
                    agents: Some(1),
                },
                StagePatch {
                    name: "multi-agent".into(),
                    arena: Some([10.0, 10.0]),
                    obstacles: Some(35),
                    agents: Some(10),
                },
            ],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Collect/update cycles.
    pub iterations: usize,
    /// Decisions collected per agent and world in each iteration.
    pub horizon: usize,
    /// Passes over the buffer per iteration.
    pub epochs: usize,
    pub minibatch: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Independent worlds collected side by side.
    pub envs: usize,
    pub seed: u64,
    /// Save a checkpoint every this many iterations (0: final only).
    pub checkpoint_every: usize,
    pub ppo: PpoConfig,
    pub adam: AdamConfig,
    pub curriculum: CurriculumConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            horizon: 2500,
            epochs: 4,
            minibatch: 1024,
            gamma: 0.99,
            lambda: 0.95,
            envs: 1,
            seed: 0,
            checkpoint_every: 10,
            ppo: PpoConfig::default(),
            adam: AdamConfig::default(),
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.horizon == 0 || self.envs == 0 {
            return bad("epochs, minibatch, horizon and envs must be at least 1");
        }
        if self.curriculum.window == 0 {
            return bad("curriculum window must be at least 1");
        }
        self.ppo.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn patch_overrides_only_given_fields() {
        let base = ScenarioConfig::default();
        let s = CurriculumConfig::three_stage().stages[0].apply(&base);
        assert_eq!(s.arena, [8.0, 8.0]);
        assert_eq!(s.obstacles, 5);
        assert_eq!(s.agents, 1);
        assert_eq!(s.lidar, base.lidar);
    }
}
