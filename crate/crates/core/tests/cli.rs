//! The `lstp` binary driven as a subprocess on the toy config.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lstp_nav::sim::{AgentSpawn, Layout, TrajectoryRecord};

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/toy.toml")
}

fn lstp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lstp"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn train(out: &Path, seed: &str) -> String {
    let cfg = toy_config();
    ok(&lstp(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ],
        &[],
    ));
    std::fs::read_to_string(out.join("curves.jsonl")).unwrap()
}

#[test]
fn training_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(&dir.path().join("a"), "7");
    let b = train(&dir.path().join("b"), "7");
    assert_eq!(a.lines().count(), 3);
    assert_eq!(a, b);
    let c = train(&dir.path().join("c"), "8");
    assert_ne!(a, c);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["train_seed"], 7);
    for ckpt in manifest["checkpoints"].as_array().unwrap() {
        assert!(dir.path().join("a").join(ckpt.as_str().unwrap()).is_file());
    }
}

#[test]
fn evaluation_records_and_plots_trials() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&run, "3");
    let ckpt = run.join("checkpoints/iter_00003.lstp");
    let eval_dir = dir.path().join("eval");
    let cfg = toy_config();
    ok(&lstp(
        &[
            "eval",
            "--config",
            cfg.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--paired",
            run.join("checkpoints/iter_00000.lstp").to_str().unwrap(),
            "--out",
            eval_dir.to_str().unwrap(),
            "--record",
            "2",
            "--workers",
            "2",
        ],
        &[],
    ));
    let metrics = std::fs::read_to_string(eval_dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    for line in metrics.lines() {
        let m: serde_json::Value = serde_json::from_str(line).unwrap();
        let total = m["sr"].as_f64().unwrap() + m["cr"].as_f64().unwrap() + m["tr"].as_f64().unwrap();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(m["n_trials"], 5);
    }
    let svg = std::fs::read_to_string(eval_dir.join("plots/p0_trial_0001.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);

    // re-plot a recorded trial through the plot subcommand
    let replot = dir.path().join("again.svg");
    ok(&lstp(
        &[
            "plot",
            "--trajectory",
            eval_dir.join("trajectories/p0_trial_0001.jsonl").to_str().unwrap(),
            "--world",
            eval_dir.join("worlds/p0_trial_0001.json").to_str().unwrap(),
            "--out",
            replot.to_str().unwrap(),
        ],
        &[],
    ));
    assert_eq!(std::fs::read_to_string(replot).unwrap(), svg);
}

#[test]
fn plots_give_every_agent_its_own_colour() {
    let dir = tempfile::tempdir().unwrap();
    let layout = Layout {
        arena: [10.0, 10.0],
        obstacles: vec![],
        agents: (0..8)
            .map(|i| AgentSpawn {
                start: [1.0, 1.0 + i as f64],
                heading: 0.0,
                goal: [9.0, 1.0 + i as f64],
            })
            .collect(),
    };
    let records: Vec<TrajectoryRecord> = (0..8)
        .flat_map(|i| {
            (0..3).map(move |k| TrajectoryRecord {
                step: k,
                agent: i,
                x: 1.0 + k as f64,
                y: 1.0 + i as f64,
                theta: 0.0,
                v: 1.0,
                omega: 0.0,
                reward: 0.0,
                event: "none".into(),
            })
        })
        .collect();
    let traj = dir.path().join("t.jsonl");
    let mut buf = Vec::new();
    lstp_nav::sim::trajectory::write_jsonl(&mut buf, &records).unwrap();
    std::fs::write(&traj, buf).unwrap();
    let world = dir.path().join("w.json");
    std::fs::write(&world, serde_json::to_string(&layout).unwrap()).unwrap();
    let svg_path = dir.path().join("p.svg");
    ok(&lstp(
        &[
            "plot",
            "--trajectory",
            traj.to_str().unwrap(),
            "--world",
            world.to_str().unwrap(),
            "--out",
            svg_path.to_str().unwrap(),
        ],
        &[],
    ));
    let svg = std::fs::read_to_string(svg_path).unwrap();
    let colours: std::collections::BTreeSet<&str> = svg
        .lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| l.split("stroke=\"").nth(1).unwrap().split('"').next().unwrap())
        .collect();
    assert_eq!(colours.len(), 8);
    assert!(!svg.contains("failure"));
}

#[test]
fn replay_inspection_restores_a_logged_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config();
    ok(&lstp(
        &[
            "inspect-replay",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    ));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("replay.json")).unwrap()).unwrap();
    assert_eq!(dump["restored_matches_history"], true);
    assert!(dump["collision_step"].as_u64().is_some());
}

#[test]
fn environment_overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config();
    ok(&lstp(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[("LSTP_TRAIN__ITERATIONS", "1"), ("LSTP_TRAIN__ADAM__LR", "0.01")],
    ));
    let written = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    let back = lstp_nav::config::RunConfig::from_toml_str(&written).unwrap();
    assert_eq!(back.train.iterations, 1);
    assert_eq!(back.train.adam.lr, 0.01);
}

#[test]
fn exit_codes_separate_usage_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lstp(&["train"], &[]).status.code(), Some(1));
    assert_eq!(lstp(&["fly", "--out", "x"], &[]).status.code(), Some(1));
    let missing = dir.path().join("none.lstp");
    let out = lstp(
        &[
            "eval",
            "--checkpoint",
            missing.to_str().unwrap(),
            "--out",
            dir.path().join("e").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
