//! Train the desk-sized stage-1 configuration and evaluate the result.
//!
//! ```text
//! cargo run --release --example train_stage1 -- 120 runs/stage1
//! ```
//!
//! The full 120 iterations take about five minutes on one core.

use std::path::Path;

use anyhow::Result;
use lstp_nav::config::RunConfig;
use lstp_nav::eval::{run_trials, EvalConfig, Metrics, NetPolicy};
use lstp_nav::train::{IterationStats, Trainer};

pub fn run_example(iterations: usize, trials: usize, out: Option<&Path>) -> Result<(Vec<IterationStats>, Metrics)> {
    let mut cfg = RunConfig::desk_stage1();
    cfg.train.iterations = iterations;
    cfg.validate()?;
    let mut trainer = Trainer::new(&cfg.scenario, &cfg.net, &cfg.train, &cfg.reward)?;
    let outcome = trainer.run(out, |s| {
        if s.iteration % 10 == 0 || s.iteration == 1 {
            println!(
                "iter {:>4}  reward {:>8.2}  success {:.2}  entropy loss {:.3}",
                s.iteration, s.mean_reward, s.success_rate, s.entropy_loss
            );
        }
    })?;
    let policy = NetPolicy::new("stage1", trainer.params.clone(), true);
    let eval = EvalConfig {
        n_trials: trials,
        ..cfg.eval.clone()
    };
    let metrics = run_trials(&policy, &cfg.scenario, &cfg.reward, cfg.net.stack, &eval)?;
    Ok((outcome.curves, metrics))
}

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map(|s| s.parse()).transpose()?.unwrap_or(120);
    let out = args.next();
    let (_, m) = run_example(iterations, 100, out.as_deref().map(Path::new))?;
    println!(
        "evaluation over {} trials: SR {:.2}  CR {:.2}  TR {:.2}",
        m.n_trials, m.success_rate, m.collision_rate, m.trap_rate
    );
    Ok(())
}
