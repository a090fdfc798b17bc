//! The `lstp` command line: train, eval, compare, plot, inspect-replay.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Error;
use crate::eval::{self, GoalSeeker, NetPolicy, Policy, ZeroPolicy};
use crate::net::{NetParams, Variant};
use crate::rewards::RewardMode;
use crate::sim::{goal_bearing, trajectory, Layout, ReplayOutcome, SimMode, Snapshot, World};
use crate::train::Trainer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lstp", version, about = "Map-free multi-agent LiDAR navigation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write checkpoints, curves and a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint over seeded trials.
    Eval(EvalArgs),
    /// Evaluate several checkpoints and baselines on identical worlds.
    Compare(CompareArgs),
    /// Render a trajectory log over its world as SVG.
    Plot(PlotArgs),
    /// Drive an agent into a collision and dump its replay history.
    InspectReplay(ReplayArgs),
}

/// Flags shared by the commands that read a run config.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run config; defaults apply to absent keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides both the training and the evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub reward: Option<RewardMode>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Overrides `train.iterations`.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalFlags {
    #[arg(long)]
    pub n_trials: Option<usize>,
    /// Act on the policy mean (default).
    #[arg(long, conflicts_with = "stochastic")]
    pub deterministic: bool,
    /// Sample actions from the policy distribution.
    #[arg(long)]
    pub stochastic: bool,
    /// Save trajectories, worlds and SVG plots for the first N trials.
    #[arg(long, default_value_t = 0)]
    pub record: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: EvalFlags,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Further checkpoints evaluated on the same worlds; emits a comparison.
    #[arg(long)]
    pub paired: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Zero,
    GoalSeeker,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: EvalFlags,
    /// Checkpoint to include; repeatable.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Scripted policy to include; repeatable.
    #[arg(long, value_enum)]
    pub baseline: Vec<Baseline>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trajectory records, one JSON object per line.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// World layout JSON as written by `eval --record`.
    #[arg(long)]
    pub world: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub agent: usize,
    /// Give up after this many physics steps without a collision.
    #[arg(long, default_value_t = 20_000)]
    pub max_steps: u64,
}

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub train_seed: u64,
    pub eval_seed: u64,
    /// Input files, as given on the command line.
    pub inputs: Vec<PathBuf>,
    /// Checkpoints written, relative to the run directory.
    pub checkpoints: Vec<PathBuf>,
    /// Logs and metric files written, relative to the run directory.
    pub logs: Vec<PathBuf>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            train_seed: config.train.seed,
            eval_seed: config.eval.seed,
            inputs: Vec::new(),
            checkpoints: Vec::new(),
            logs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    fn finish(mut self, out: &Path) -> anyhow::Result<()> {
        self.finished_unix = unix_now();
        write(out, "manifest.json", serde_json::to_string_pretty(&self)? + "\n")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    let p = dir.join(name);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
}

/// Config file, then `LSTP_*` environment overrides, then flags.
fn resolve_config(c: &Common) -> anyhow::Result<RunConfig> {
    let base = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_env_overrides()?;
    if let Some(s) = c.seed {
        cfg.train.seed = s;
        cfg.eval.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.eval.workers = w;
    }
    if let Some(v) = c.variant {
        cfg.net.variant = v;
    }
    if let Some(r) = c.reward {
        cfg.reward.mode = r;
    }
    Ok(cfg)
}

fn apply_eval_flags(cfg: &mut RunConfig, f: &EvalFlags) {
    if let Some(n) = f.n_trials {
        cfg.eval.n_trials = n;
    }
    if f.stochastic {
        cfg.eval.deterministic = false;
    } else if f.deterministic {
        cfg.eval.deterministic = true;
    }
}

fn load_policy(path: &Path, cfg: &RunConfig, variant: Option<Variant>) -> anyhow::Result<NetPolicy> {
    let params = NetParams::<f32>::load(path)?;
    if params.config.n_laser != cfg.scenario.lidar.n_laser {
        return Err(Error::Load(format!(
            "{} expects {} beams but the scenario has {}",
            path.display(),
            params.config.n_laser,
            cfg.scenario.lidar.n_laser
        ))
        .into());
    }
    if let Some(v) = variant.filter(|&v| v != params.config.variant) {
        return Err(Error::Load(format!(
            "{} holds a {} network, not {}",
            path.display(),
            params.config.variant.name(),
            v.name()
        ))
        .into());
    }
    let label = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(NetPolicy::new(label, params, cfg.eval.deterministic))
}

fn cmd_train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    cfg.validate()?;
    let out = &a.common.out;
    let mut trainer = Trainer::new(&cfg.scenario, &cfg.net, &cfg.train, &cfg.reward)?;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("train", &cfg);
    manifest.inputs.extend(a.common.config.clone());
    write(out, "config.toml", cfg.to_toml()?)?;
    let outcome = trainer.run(Some(out), |s| {
        println!(
            "iter {:>5}  stage {}  reward {:>9.3}  success {:.3}  arrivals {:>3}  collisions {:>3}  policy {:>8.4}  value {:>9.4}",
            s.iteration, s.stage, s.mean_reward, s.success_rate, s.arrivals, s.collisions, s.policy_loss, s.value_loss
        );
    })?;
    manifest.checkpoints = outcome
        .checkpoints
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).to_path_buf())
        .collect();
    manifest.logs = vec!["curves.jsonl".into(), "config.toml".into()];
    if let Some(last) = manifest.checkpoints.last() {
        println!("final checkpoint: {}", out.join(last).display());
    }
    manifest.finish(out)
}

/// Evaluate `policies` on shared worlds and write metrics into `out`.
fn evaluate_into(
    out: &Path,
    cfg: &RunConfig,
    policies: &[&dyn Policy],
    record: usize,
    manifest: &mut RunManifest,
) -> anyhow::Result<()> {
    let cmp = eval::compare_policies(policies, &cfg.scenario, &cfg.reward, cfg.net.stack, &cfg.eval)?;
    let mut trials = String::new();
    for (name, m) in &cmp.rows {
        for t in &m.trials {
            let mut v = serde_json::to_value(t)?;
            v["policy"] = name.as_str().into();
            trials += &(v.to_string() + "\n");
        }
    }
    write(out, "metrics.jsonl", cmp.to_jsonl())?;
    write(out, "metrics.txt", cmp.to_text())?;
    write(out, "trials.jsonl", trials)?;
    manifest
        .logs
        .extend(["metrics.jsonl", "metrics.txt", "trials.jsonl"].map(PathBuf::from));
    print!("{}", cmp.to_text());
    for (pi, p) in policies.iter().enumerate() {
        for k in 0..record.min(cfg.eval.n_trials) {
            let (_, log, layout) = eval::run_trial(*p, &cfg.scenario, &cfg.reward, cfg.net.stack, &cfg.eval, k, true)?;
            let stem = format!("p{pi}_trial_{k:04}");
            let mut jsonl = Vec::new();
            trajectory::write_jsonl(&mut jsonl, &log)?;
            write(out, &format!("trajectories/{stem}.jsonl"), jsonl)?;
            write(
                out,
                &format!("worlds/{stem}.json"),
                serde_json::to_string_pretty(&layout)?,
            )?;
            write(out, &format!("plots/{stem}.svg"), eval::render_svg(&log, &layout)?)?;
            for dir in ["trajectories", "worlds", "plots"] {
                let ext = match dir {
                    "trajectories" => "jsonl",
                    "worlds" => "json",
                    _ => "svg",
                };
                manifest.logs.push(PathBuf::from(format!("{dir}/{stem}.{ext}")));
            }
        }
    }
    if !cmp.paired() {
        bail!("evaluation worlds differ between policies");
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&a.common)?;
    apply_eval_flags(&mut cfg, &a.flags);
    let mut paths = vec![a.checkpoint.clone()];
    paths.extend(a.paired.iter().cloned());
    let policies = paths
        .iter()
        .map(|p| load_policy(p, &cfg, a.common.variant))
        .collect::<anyhow::Result<Vec<_>>>()?;
    cfg.net = policies[0].params.config.clone();
    cfg.validate()?;
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("eval", &cfg);
    manifest.inputs = paths;
    let refs: Vec<&dyn Policy> = policies.iter().map(|p| p as &dyn Policy).collect();
    evaluate_into(out, &cfg, &refs, a.flags.record, &mut manifest)?;
    manifest.finish(out)
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    if a.checkpoint.is_empty() && a.baseline.is_empty() {
        bail!("compare needs at least one --checkpoint or --baseline");
    }
    let mut cfg = resolve_config(&a.common)?;
    apply_eval_flags(&mut cfg, &a.flags);
    let nets = a
        .checkpoint
        .iter()
        .map(|p| load_policy(p, &cfg, None))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(first) = nets.first() {
        cfg.net.stack = first.params.config.stack;
        if nets.iter().any(|n| n.params.config.stack != cfg.net.stack) {
            bail!("compared checkpoints disagree on the frame stack depth");
        }
    }
    cfg.net.n_laser = cfg.scenario.lidar.n_laser;
    let seeker = GoalSeeker::default();
    let mut refs: Vec<&dyn Policy> = nets.iter().map(|p| p as &dyn Policy).collect();
    for b in &a.baseline {
        refs.push(match b {
            Baseline::Zero => &ZeroPolicy,
            Baseline::GoalSeeker => &seeker,
        });
    }
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("compare", &cfg);
    manifest.inputs = a.checkpoint.clone();
    evaluate_into(out, &cfg, &refs, a.flags.record, &mut manifest)?;
    manifest.finish(out)
}

fn cmd_plot(a: &PlotArgs) -> anyhow::Result<()> {
    let file = std::fs::File::open(&a.trajectory).with_context(|| format!("opening {}", a.trajectory.display()))?;
    let records = trajectory::read_jsonl(std::io::BufReader::new(file))?;
    let text = std::fs::read_to_string(&a.world).with_context(|| format!("reading {}", a.world.display()))?;
    let layout: Layout = serde_json::from_str(&text).map_err(|e| Error::Load(format!("{}: {e}", a.world.display())))?;
    let svg = eval::render_svg(&records, &layout)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&a.out, svg)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Contents of `replay.json` written by `inspect-replay`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayDump {
    pub agent: usize,
    pub collision_step: u64,
    pub collision_count: u32,
    /// History ring at the moment of contact, oldest first.
    pub history: Vec<Snapshot>,
    pub restored: Option<Snapshot>,
    pub respawned: bool,
    /// Whether the restored state equals the ring entry `horizon` back.
    pub restored_matches_history: bool,
}

fn cmd_inspect_replay(a: &ReplayArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(&a.common)?;
    cfg.scenario.validate()?;
    let mut world = World::generate(&cfg.scenario, SimMode::Train, cfg.train.seed)?;
    let i = a.agent;
    if i >= world.agents.len() {
        bail!("agent {i} does not exist; the scenario has {}", world.agents.len());
    }
    let seeker = GoalSeeker::default();
    let horizon = cfg.scenario.replay.horizon;
    let dump = loop {
        if world.step >= a.max_steps {
            bail!("agent {i} did not collide within {} steps", a.max_steps);
        }
        let actions: Vec<[f64; 2]> = (0..world.agents.len())
            .map(|j| {
                let b = goal_bearing(&world, j);
                let v = if b.abs() < 0.3 { seeker.speed } else { 0.0 };
                crate::net::clamp_action([v, seeker.gain * b])
            })
            .collect();
        world.step(&actions)?;
        for j in 0..world.agents.len() {
            if world.agents[j].status == crate::sim::AgentStatus::Arrived {
                world.assign_new_goal(j)?;
            }
        }
        for j in 0..world.agents.len() {
            if j != i && world.agents[j].pending_replay {
                world.apply_replay(j)?;
            }
        }
        if world.step >= cfg.scenario.episode_steps {
            bail!("episode ended at step {} without a collision of agent {i}", world.step);
        }
        if !world.agents[i].pending_replay {
            continue;
        }
        let history: Vec<Snapshot> = world.history(i).entries().copied().collect();
        let expected = history
            .len()
            .checked_sub(horizon + 1)
            .map(|k| history[k])
            .or(history.first().copied());
        let collision_step = world.step;
        let outcome = world.apply_replay(i)?;
        let restored = match outcome {
            ReplayOutcome::Restored { step } => Some(Snapshot {
                step,
                kinematics: world.agents[i].kinematics,
            }),
            ReplayOutcome::Respawned => None,
        };
        break ReplayDump {
            agent: i,
            collision_step,
            collision_count: world.agents[i].collision_count,
            restored_matches_history: restored.is_some() && restored == expected,
            history,
            restored,
            respawned: matches!(outcome, ReplayOutcome::Respawned),
        };
    };
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("inspect-replay", &cfg);
    manifest.inputs.extend(a.common.config.clone());
    write(out, "replay.json", serde_json::to_string_pretty(&dump)? + "\n")?;
    manifest.logs.push("replay.json".into());
    println!(
        "agent {} collided at step {}; history holds {} snapshots; {}",
        dump.agent,
        dump.collision_step,
        dump.history.len(),
        match &dump.restored {
            Some(s) => format!(
                "restored to step {} (matches ring: {})",
                s.step, dump.restored_matches_history
            ),
            None => "respawned".into(),
        }
    );
    manifest.finish(out)
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Plot(a) => cmd_plot(a),
        Command::InspectReplay(a) => cmd_inspect_replay(a),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["lstp", "fly"]), EXIT_USAGE);
        assert_eq!(run(["lstp", "eval", "--out", "x"]), EXIT_USAGE);
        assert_eq!(run(["lstp", "train", "--out", "x", "--variant", "lstm"]), EXIT_USAGE);
    }

    #[test]
    fn missing_config_is_runtime_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let code = run([
            "lstp",
            "train",
            "--config",
            dir.path().join("absent.toml").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(!out.exists());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "lstp",
            "train",
            "--out",
            "o",
            "--seed",
            "7",
            "--variant",
            "gru",
            "--reward",
            "conventional",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let cfg = resolve_config(&a.common).unwrap();
        assert_eq!((cfg.train.seed, cfg.eval.seed), (7, 7));
        assert_eq!(cfg.net.variant, Variant::Gru);
        assert_eq!(cfg.reward.mode, RewardMode::Conventional);
    }

    #[test]
    fn deterministic_and_stochastic_conflict() {
        assert_eq!(
            run([
                "lstp",
                "eval",
                "--out",
                "o",
                "--checkpoint",
                "c",
                "--deterministic",
                "--stochastic"
            ]),
            EXIT_USAGE
        );
    }
}
