//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use lstp_nav::sim::{Obstacle, ObstacleKind, Point, World};

static EXCLUSIVE: Mutex<()> = Mutex::new(());

/// Serializes tests that time themselves or use the whole CPU.
pub fn exclusive() -> MutexGuard<'static, ()> {
    EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner())
}

/// Print a line that bypasses the test harness's output capture.
pub fn announce(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

/// Signed distance from `p` to one obstacle, written from the obstacle
/// description alone: unit-radius-half discs, unit squares, and capsules
/// whose core segment runs one metre either side of the centre.
pub fn obstacle_sdf(o: &Obstacle, p: Point) -> f64 {
    let (dx, dy) = (p[0] - o.position[0], p[1] - o.position[1]);
    match o.kind {
        ObstacleKind::Sphere | ObstacleKind::Cylinder => dx.hypot(dy) - 0.5,
        ObstacleKind::Cube => {
            let (s, c) = o.theta.sin_cos();
            let (lx, ly) = ((c * dx + s * dy).abs() - 0.5, (-s * dx + c * dy).abs() - 0.5);
            lx.max(0.0).hypot(ly.max(0.0)) + lx.max(ly).min(0.0)
        }
        ObstacleKind::Capsule => {
            let (s, c) = o.theta.sin_cos();
            let along = (c * dx + s * dy).clamp(-1.0, 1.0);
            (dx - along * c).hypot(dy - along * s) - 0.5
        }
    }
}

/// Distance from `p` to the nearest solid thing other than agent `skip`:
/// obstacles, the arena boundary, and other active agents.
pub fn scene_sdf(world: &World, p: Point, skip: usize) -> f64 {
    let [w, h] = world.config.arena;
    let mut d = p[0].min(w - p[0]).min(p[1]).min(h - p[1]);
    for o in &world.obstacles {
        d = d.min(obstacle_sdf(o, p));
    }
    for (j, a) in world.agents.iter().enumerate() {
        if j != skip && a.is_active() {
            let c = a.kinematics.position;
            d = d.min((p[0] - c[0]).hypot(p[1] - c[1]) - a.radius);
        }
    }
    d
}

/// Sphere-traced range along `dir` from `origin`, capped at `z_max`.
pub fn raymarch(world: &World, origin: Point, dir: Point, skip: usize, z_max: f64) -> f64 {
    let mut t = 0.0;
    for _ in 0..100_000 {
        let p = [origin[0] + t * dir[0], origin[1] + t * dir[1]];
        let d = scene_sdf(world, p, skip);
        if d < 1e-9 {
            return t.min(z_max);
        }
        t += d;
        if t >= z_max {
            return z_max;
        }
    }
    t.min(z_max)
}

/// Clearance between agent `i`'s disc and the static scene (obstacles and
/// walls) when its centre sits at `p`.
pub fn static_clearance(world: &World, p: Point, i: usize) -> f64 {
    let [w, h] = world.config.arena;
    let mut d = p[0].min(w - p[0]).min(p[1]).min(h - p[1]);
    for o in &world.obstacles {
        d = d.min(obstacle_sdf(o, p));
    }
    d - world.agents[i].radius
}
