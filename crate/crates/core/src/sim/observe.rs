use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::{dist, wrap_angle};
use super::world::World;

/// Most recent LiDAR scans for one agent, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    pub fn new(depth: usize) -> Self {
        Self {
            depth: depth.max(1),
            frames: VecDeque::with_capacity(depth.max(1)),
        }
    }

    /// Fill every slot with `scan` (episode start or after a replay).
    pub fn reset(&mut self, scan: &[f64]) {
        self.frames.clear();
        for _ in 0..self.depth {
            self.frames.push_back(scan.to_vec());
        }
    }

    pub fn push(&mut self, scan: Vec<f64>) {
        if self.frames.is_empty() {
            self.reset(&scan);
            return;
        }
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(scan);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn frames(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.frames.iter()
    }

    pub fn latest(&self) -> Option<&[f64]> {
        self.frames.back().map(Vec::as_slice)
    }
}

/// Normalized network input for one agent at one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub stack: usize,
    pub n_laser: usize,
    /// `stack × n_laser` ranges divided by the range cap, oldest frame first.
    pub scans: Vec<f32>,
    /// Clipped goal distance over the cap, and goal bearing over π.
    pub goal: [f32; 2],
    /// Previous commanded linear velocity and angular velocity over π.
    pub velocity: [f32; 2],
}

impl Observation {
    pub fn state(&self) -> [f32; 4] {
        [self.goal[0], self.goal[1], self.velocity[0], self.velocity[1]]
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.scans[t * self.n_laser..(t + 1) * self.n_laser]
    }
}

/// Goal bearing relative to the heading in (−π, π]; positive means left.
pub fn goal_bearing(world: &World, i: usize) -> f64 {
    let a = &world.agents[i];
    let k = &a.kinematics;
    let dx = a.goal[0] - k.position[0];
    let dy = a.goal[1] - k.position[1];
    wrap_angle(dy.atan2(dx) - k.heading)
}

pub fn observe(world: &World, i: usize, frames: &FrameStack) -> Observation {
    let z_max = world.config.lidar.z_max;
    let a = &world.agents[i];
    let n_laser = frames.latest().map_or(0, <[f64]>::len);
    let scans = frames
        .frames()
        .flat_map(|f| f.iter().map(|&z| (z / z_max) as f32))
        .collect();
    let d = dist(a.kinematics.position, a.goal);
    Observation {
        stack: frames.depth(),
        n_laser,
        scans,
        goal: [(d.min(z_max) / z_max) as f32, (goal_bearing(world, i) / PI) as f32],
        velocity: [a.kinematics.v_cmd as f32, (a.kinematics.omega_cmd / PI) as f32],
    }
}
