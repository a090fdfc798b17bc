//! Generate a world and print agent 0's range scan as a bar chart.
//!
//! ```text
//! cargo run --release --example lidar_scan -- 42
//! ```

use anyhow::Result;
use lstp_nav::sim::{lidar_scan, ScenarioConfig, SimMode, World};

/// Beam angles (relative to the heading) and ranges for agent 0.
pub fn run_example(seed: u64) -> Result<(World, Vec<(f64, f64)>)> {
    let mut scenario = ScenarioConfig::stage2();
    scenario.lidar.n_laser = 24;
    let world = World::generate(&scenario, SimMode::Eval, seed)?;
    let scan = lidar_scan(&world, 0);
    let beams = scenario.lidar.beam_angles().into_iter().zip(scan).collect();
    Ok((world, beams))
}

fn main() -> Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let (world, beams) = run_example(seed)?;
    let k = world.agents[0].kinematics;
    println!(
        "agent at ({:.2}, {:.2}) heading {:.2} rad, {} obstacles",
        k.position[0],
        k.position[1],
        k.heading,
        world.obstacles.len()
    );
    let z_max = world.config.lidar.z_max;
    for (angle, range) in beams {
        let bar = "#".repeat((40.0 * range / z_max).round() as usize);
        println!("{:>7.1}°  {range:5.2} m  {bar}", angle.to_degrees());
    }
    Ok(())
}
