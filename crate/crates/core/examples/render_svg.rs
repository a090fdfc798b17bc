//! Record a multi-agent trial driven by the goal seeker and draw it.
//!
//! ```text
//! cargo run --release --example render_svg -- trial.svg
//! ```

use anyhow::Result;
use lstp_nav::eval::{render_svg, run_trial, EvalConfig, GoalSeeker, TrialRecord};
use lstp_nav::rewards::RewardConfig;
use lstp_nav::sim::ScenarioConfig;

pub fn run_example(trial: usize) -> Result<(TrialRecord, String)> {
    let scenario = ScenarioConfig::multi_agent();
    let cfg = EvalConfig {
        seed: 3,
        ..EvalConfig::default()
    };
    let (record, log, layout) = run_trial(
        &GoalSeeker::default(),
        &scenario,
        &RewardConfig::default(),
        5,
        &cfg,
        trial,
        true,
    )?;
    Ok((record, render_svg(&log, &layout)?))
}

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "trial.svg".into());
    let (record, svg) = run_example(0)?;
    std::fs::write(&path, svg)?;
    for a in &record.agents {
        println!("agent {}: {:?} after {} steps", a.agent, a.outcome, a.steps);
    }
    println!("wrote {path}");
    Ok(())
}
