//! Goal-progress and obstacle rewards, including the heading-stability
//! weighting of LiDAR beams.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::geometry::{dist, Point};
use crate::sim::ARRIVAL_DISTANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Beams weighted by a Gaussian centred on the predicted turn.
    #[default]
    Hs,
    /// Uniform penalty on the nearest return.
    Conventional,
}

impl RewardMode {
    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Hs => "hs",
            RewardMode::Conventional => "conventional",
        }
    }
}

impl std::str::FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hs" => Ok(RewardMode::Hs),
            "conventional" => Ok(RewardMode::Conventional),
            other => Err(Error::Config(format!(
                "unknown reward mode {other:?} (expected hs or conventional)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub r_arrival: f64,
    pub r_collision: f64,
    /// Weight on the per-step reduction in goal distance.
    pub w_g: f64,
    /// Scale of the obstacle proximity penalty.
    pub k_c: f64,
    /// Angular spread of the beam weights (rad).
    pub sigma_hs: f64,
    pub mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_arrival: 20.0,
            r_collision: -20.0,
            w_g: 2.5,
            k_c: 0.5,
            sigma_hs: 0.5,
            mode: RewardMode::Hs,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_hs > 0.0) {
            return Err(Error::Config(format!(
                "sigma_hs must be positive, got {}",
                self.sigma_hs
            )));
        }
        if !(self.r_arrival > 0.0 && self.r_collision < 0.0) {
            return Err(Error::Config(format!(
                "need r_arrival > 0 > r_collision, got {} and {}",
                self.r_arrival, self.r_collision
            )));
        }
        Ok(())
    }
}

pub fn goal_reward(prev_pos: Point, pos: Point, goal: Point, cfg: &RewardConfig) -> f64 {
    let d = dist(pos, goal);
    if d < ARRIVAL_DISTANCE {
        cfg.r_arrival
    } else {
        cfg.w_g * (dist(prev_pos, goal) - d)
    }
}

/// Unnormalized Gaussian density of beam angle `theta` around `center`.
pub fn hs_raw_weight(theta: f64, center: f64, sigma: f64) -> f64 {
    let z = (theta - center) / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Beam weights centred on the angular displacement `omega * dt`,
/// normalized to sum to one.
pub fn hs_weights(omega: f64, dt: f64, sigma: f64, beam_angles: &[f64]) -> Vec<f64> {
    let center = omega * dt;
    let raw: Vec<f64> = beam_angles.iter().map(|&a| hs_raw_weight(a, center, sigma)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.into_iter().map(|w| w / total).collect()
    } else {
        // every beam is far outside the spread: fall back to the nearest one
        let nearest = beam_angles
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
            .map_or(0, |(i, _)| i);
        (0..beam_angles.len())
            .map(|i| if i == nearest { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Weighted proximity penalty `-k_c Σ w_j (z_max - z_j)`, or the collision
/// reward when `collided`.
pub fn obstacle_reward(scan: &[f64], weights: &[f64], collided: bool, z_max: f64, cfg: &RewardConfig) -> Result<f64> {
    if scan.len() != weights.len() {
        return Err(Error::Contract(format!(
            "scan has {} beams but {} weights",
            scan.len(),
            weights.len()
        )));
    }
    if collided {
        return Ok(cfg.r_collision);
    }
    let s: f64 = scan.iter().zip(weights).map(|(&z, &w)| w * (z_max - z)).sum();
    Ok(-cfg.k_c * s)
}

/// Nearest-return penalty `-k_c (z_max - min z)`.
pub fn conventional_obstacle_reward(scan: &[f64], collided: bool, z_max: f64, cfg: &RewardConfig) -> f64 {
    if collided {
        return cfg.r_collision;
    }
    let nearest = scan.iter().copied().fold(z_max, f64::min);
    -cfg.k_c * (z_max - nearest)
}

pub fn total_reward(goal: f64, obstacle: f64) -> f64 {
    goal + obstacle
}

/// Reward evaluator bound to a sensor geometry and decision interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFn {
    pub config: RewardConfig,
    pub beam_angles: Vec<f64>,
    pub z_max: f64,
    /// Decision interval used to predict the angular displacement.
    pub dt: f64,
}

/// Components of one decision's reward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardParts {
    pub goal: f64,
    pub obstacle: f64,
    pub total: f64,
}

impl RewardFn {
    pub fn new(config: RewardConfig, beam_angles: Vec<f64>, z_max: f64, dt: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            beam_angles,
            z_max,
            dt,
        })
    }

    /// Reward for a move from `prev_pos` to `pos` under command `omega`,
    /// judged on the noise-free `scan` seen after the move.
    pub fn evaluate(
        &self,
        prev_pos: Point,
        pos: Point,
        goal: Point,
        scan: &[f64],
        omega: f64,
        collided: bool,
    ) -> Result<RewardParts> {
        let g = if collided {
            0.0
        } else {
            goal_reward(prev_pos, pos, goal, &self.config)
        };
        let o = match self.config.mode {
            RewardMode::Hs => {
                let w = hs_weights(omega, self.dt, self.config.sigma_hs, &self.beam_angles);
                obstacle_reward(scan, &w, collided, self.z_max, &self.config)?
            }
            RewardMode::Conventional => conventional_obstacle_reward(scan, collided, self.z_max, &self.config),
        };
        Ok(RewardParts {
            goal: g,
            obstacle: o,
            total: total_reward(g, o),
        })
    }
}
