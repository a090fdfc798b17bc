//! How the heading-stability weights follow the turn rate, and how the
//! resulting penalty compares with a nearest-obstacle penalty.

use anyhow::Result;
use lstp_nav::rewards::{conventional_obstacle_reward, hs_weights, obstacle_reward, RewardConfig};
use lstp_nav::sim::LidarConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub omega: f64,
    /// Beam angle receiving the most weight.
    pub focus: f64,
    pub hs: f64,
    pub nearest: f64,
}

/// An obstacle sits 0.6 m away on the left; turning towards it costs more
/// under the weighted penalty while the nearest-return penalty is blind to
/// the turn.
pub fn run_example() -> Result<Vec<Row>> {
    let lidar = LidarConfig {
        n_laser: 21,
        ..LidarConfig::default()
    };
    let cfg = RewardConfig::default();
    let angles = lidar.beam_angles();
    let scan: Vec<f64> = angles
        .iter()
        .map(|&a| if a > 0.8 { 0.6 } else { lidar.z_max })
        .collect();
    let mut rows = Vec::new();
    for omega in [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0] {
        let w = hs_weights(omega, 0.1, cfg.sigma_hs, &angles);
        let focus = angles[(0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0)];
        rows.push(Row {
            omega,
            focus,
            hs: obstacle_reward(&scan, &w, false, lidar.z_max, &cfg)?,
            nearest: conventional_obstacle_reward(&scan, false, lidar.z_max, &cfg),
        });
    }
    Ok(rows)
}

fn main() -> Result<()> {
    println!(
        "{:>8} {:>10} {:>10} {:>10}",
        "ω rad/s", "focus °", "weighted", "nearest"
    );
    for r in run_example()? {
        println!(
            "{:>8.1} {:>10.1} {:>10.4} {:>10.4}",
            r.omega,
            r.focus.to_degrees(),
            r.hs,
            r.nearest
        );
    }
    Ok(())
}
