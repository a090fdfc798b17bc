//! Drive an agent into a wall during training and watch the world rewind it
//! to where it was a few seconds earlier.

use anyhow::{bail, Result};
use lstp_nav::sim::{AgentSpawn, Layout, ReplayOutcome, ScenarioConfig, SimMode, World};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayDemo {
    pub collision_step: u64,
    pub outcome: ReplayOutcome,
    pub position_before: [f64; 2],
    pub position_after: [f64; 2],
}

pub fn run_example() -> Result<ReplayDemo> {
    let scenario = ScenarioConfig {
        arena: [10.0, 10.0],
        agents: 1,
        layout: Some(Layout {
            arena: [10.0, 10.0],
            obstacles: vec![],
            agents: vec![AgentSpawn {
                start: [1.0, 5.0],
                heading: 0.0,
                goal: [1.0, 9.0],
            }],
        }),
        ..ScenarioConfig::stage1()
    };
    let mut world = World::generate(&scenario, SimMode::Train, 1)?;
    while !world.agents[0].pending_replay {
        if world.step > 5_000 {
            bail!("no collision");
        }
        world.step(&[[1.0, 0.0]])?;
    }
    let collision_step = world.step;
    let position_before = world.agents[0].kinematics.position;
    let outcome = world.apply_replay(0)?;
    Ok(ReplayDemo {
        collision_step,
        outcome,
        position_before,
        position_after: world.agents[0].kinematics.position,
    })
}

fn main() -> Result<()> {
    let d = run_example()?;
    println!(
        "hit the wall at step {} at x = {:.3} m",
        d.collision_step, d.position_before[0]
    );
    println!(
        "replay: {:?}, agent back at x = {:.3} m",
        d.outcome, d.position_after[0]
    );
    Ok(())
}
