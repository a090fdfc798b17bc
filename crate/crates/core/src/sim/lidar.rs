use super::geometry::{dist, dot, ray_walls, sub, Point};
use super::world::World;

/// Cast one ray from `origin` along unit `dir` and return the first hit
/// distance against walls, obstacles, and the listed agent discs.
pub fn cast_ray(world: &World, origin: Point, dir: Point, skip_agent: usize, z_max: f64) -> f64 {
    let mut best = ray_walls(origin, dir, world.config.arena).min(z_max);
    for f in world.footprints() {
        if let Some(t) = f.ray_hit(origin, dir) {
            best = best.min(t);
        }
    }
    for (j, a) in world.agents.iter().enumerate() {
        if j == skip_agent || !a.is_active() {
            continue;
        }
        let c = a.kinematics.position;
        // cheap rejection: the disc lies behind or beyond the current best
        let oc = sub(c, origin);
        let along = dot(oc, dir);
        if along + a.radius < 0.0 || dist(origin, c) - a.radius > best {
            continue;
        }
        let b = -along;
        let cc = dot(oc, oc) - a.radius * a.radius;
        if cc <= 0.0 {
            return 0.0;
        }
        let disc = b * b - cc;
        if disc >= 0.0 {
            let t = -b - disc.sqrt();
            if t >= 0.0 {
                best = best.min(t);
            }
        }
    }
    best.clamp(0.0, z_max)
}

/// Noise-free ranges for agent `i`, one per beam, each in `[0, z_max]`.
pub fn lidar_scan(world: &World, i: usize) -> Vec<f64> {
    let cfg = &world.config.lidar;
    let k = &world.agents[i].kinematics;
    cfg.beam_angles()
        .into_iter()
        .map(|a| {
            let (s, c) = (k.heading + a).sin_cos();
            cast_ray(world, k.position, [c, s], i, cfg.z_max)
        })
        .collect()
}

/// Ranges as the sensor reports them: noisy and clamped in training mode,
/// identical to [`lidar_scan`] otherwise.
pub fn sensor_scan(world: &mut World, i: usize) -> Vec<f64> {
    let mut scan = lidar_scan(world, i);
    world.perturb_scan(&mut scan);
    scan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::geometry::{Obstacle, ObstacleKind};
    use crate::sim::scenario::{AgentSpawn, Layout, LidarConfig, ScenarioConfig};
    use crate::sim::world::SimMode;
    use std::f64::consts::PI;

    fn world(obstacles: Vec<Obstacle>, agents: Vec<AgentSpawn>, arena: Point) -> World {
        let cfg = ScenarioConfig {
            arena,
            lidar: LidarConfig {
                n_laser: 131,
                ..LidarConfig::default()
            },
            layout: Some(Layout {
                arena,
                obstacles,
                agents,
            }),
            ..ScenarioConfig::default()
        };
        World::generate(&cfg, SimMode::Eval, 0).unwrap()
    }

    #[test]
    fn empty_world_reads_cap() {
        let w = world(
            vec![],
            vec![AgentSpawn {
                start: [10.0, 10.0],
                heading: 0.3,
                goal: [12.0, 12.0],
            }],
            [20.0, 20.0],
        );
        assert!(lidar_scan(&w, 0).iter().all(|&z| z == 4.0));
    }

    #[test]
    fn circle_dead_ahead() {
        let w = world(
            vec![Obstacle {
                kind: ObstacleKind::Sphere,
                position: [7.0, 5.0],
                theta: 0.0,
            }],
            vec![AgentSpawn {
                start: [5.0, 5.0],
                heading: 0.0,
                goal: [1.0, 1.0],
            }],
            [20.0, 10.0],
        );
        let s = lidar_scan(&w, 0);
        assert!((s[65] - 1.5).abs() < 1e-12, "{}", s[65]);
    }

    #[test]
    fn other_agents_are_visible() {
        let w = world(
            vec![],
            vec![
                AgentSpawn {
                    start: [2.0, 5.0],
                    heading: 0.0,
                    goal: [8.0, 8.0],
                },
                AgentSpawn {
                    start: [3.0, 5.0],
                    heading: PI,
                    goal: [8.0, 2.0],
                },
            ],
            [10.0, 10.0],
        );
        let s = lidar_scan(&w, 0);
        assert!((s[65] - (1.0 - 0.105)).abs() < 1e-12);
    }

    #[test]
    fn noise_stays_in_range() {
        let mut cfg = ScenarioConfig::stage1();
        cfg.lidar.noise_std = 0.5;
        let mut w = World::generate(&cfg, SimMode::Train, 2).unwrap();
        let clean = lidar_scan(&w, 0);
        let noisy = sensor_scan(&mut w, 0);
        assert_ne!(clean, noisy);
        assert!(noisy.iter().all(|&z| (0.0..=4.0).contains(&z)));
    }
}
