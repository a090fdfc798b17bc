//! Seeded evaluation, paired policy comparison, and trajectory plots.

pub mod policy;
pub mod svg;
pub mod trials;

pub use policy::{GoalSeeker, NetPolicy, Policy, ZeroPolicy};
pub use svg::{agent_color, render_svg, PALETTE};
pub use trials::{
    compare_policies, run_trial, run_trials, trial_seed, trial_world, AgentResult, Comparison, EvalConfig, Metrics,
    Outcome, TrialRecord,
};
