//! Paired evaluation of scripted baselines, plus a checkpoint if one is
//! given, on identical seeded worlds.
//!
//! ```text
//! cargo run --release --example evaluate -- runs/stage1/checkpoints/iter_00120.lstp
//! ```

use std::path::Path;

use anyhow::Result;
use lstp_nav::config::RunConfig;
use lstp_nav::eval::{compare_policies, Comparison, EvalConfig, GoalSeeker, NetPolicy, Policy, ZeroPolicy};
use lstp_nav::net::NetParams;

pub fn run_example(checkpoint: Option<&Path>, trials: usize) -> Result<Comparison> {
    let cfg = RunConfig::desk_stage1();
    let seeker = GoalSeeker::default();
    let net = checkpoint
        .map(|p| -> Result<NetPolicy> {
            Ok(NetPolicy::new(
                "checkpoint",
                NetParams::load_matching(p, &cfg.net)?,
                true,
            ))
        })
        .transpose()?;
    let mut policies: Vec<&dyn Policy> = vec![&ZeroPolicy, &seeker];
    if let Some(n) = &net {
        policies.push(n);
    }
    let eval = EvalConfig {
        n_trials: trials,
        ..cfg.eval.clone()
    };
    Ok(compare_policies(
        &policies,
        &cfg.scenario,
        &cfg.reward,
        cfg.net.stack,
        &eval,
    )?)
}

fn main() -> Result<()> {
    let ckpt = std::env::args().nth(1);
    let cmp = run_example(ckpt.as_deref().map(Path::new), 50)?;
    print!("{}", cmp.to_text());
    println!("paired worlds: {}", cmp.paired());
    Ok(())
}
