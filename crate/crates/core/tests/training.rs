//! Optimizer-level behaviour of the PPO objective and the training loop.

use lstp_nav::config::RunConfig;
use lstp_nav::net::model::{forward, ObsBatch};
use lstp_nav::net::{NetConfig, NetParams};
use lstp_nav::tensor::{AdamConfig, AdamState, Array, Graph};
use lstp_nav::train::{ppo_graph, Minibatch, PpoConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_net() -> NetConfig {
    NetConfig {
        n_laser: 8,
        stack: 3,
        d_h: 8,
        gru_layers: 1,
        heads: 2,
        enc_dim: 8,
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        ..NetConfig::default()
    }
}

/// A minibatch whose stored log-probabilities and values equal what the
/// current parameters produce.
fn on_policy_batch(p: &NetParams<f64>, batch: usize, rng: &mut ChaCha8Rng) -> Minibatch<f64> {
    let cfg = &p.config;
    let r = |rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    };
    let obs = ObsBatch {
        scans: Array::from_f64(
            &[batch, cfg.stack, cfg.n_laser],
            &r(rng, batch * cfg.stack * cfg.n_laser, 0.0, 1.0),
        )
        .unwrap(),
        state: Array::from_f64(&[batch, 4], &r(rng, batch * 4, -1.0, 1.0)).unwrap(),
    };
    let actions = Array::from_f64(&[batch, 2], &r(rng, batch * 2, -1.0, 1.0)).unwrap();
    let mut g = Graph::new(&p.values);
    let s = g.input(obs.scans.clone()).unwrap();
    let st = g.input(obs.state.clone()).unwrap();
    let f = forward(&mut g, &p.layout, cfg, s, st).unwrap();
    let a = g.input(actions.clone()).unwrap();
    let lp = g.gaussian_log_prob(a, f.mu, f.log_sigma).unwrap();
    let values = g.value(f.value).clone().reshaped(&[batch]).unwrap();
    Minibatch {
        obs,
        actions,
        old_logp: g.value(lp).clone(),
        advantages: Array::zeros(&[batch]),
        returns: values.clone(),
        old_values: values,
    }
}

#[test]
fn zero_advantages_and_exact_values_leave_only_the_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = NetParams::<f64>::init(&small_net(), &mut rng).unwrap();
    let mb = on_policy_batch(&p, 16, &mut rng);
    let mut g = Graph::new(&p.values);
    let vars = ppo_graph(&mut g, &p.layout, &p.config, &mb, &PpoConfig::default()).unwrap();
    assert_eq!(g.value(vars.policy).item(), 0.0);
    assert_eq!(g.value(vars.value).item(), 0.0);
    assert_eq!(g.backward(vars.policy).unwrap().global_norm(), 0.0);
    assert_eq!(g.backward(vars.value).unwrap().global_norm(), 0.0);
    let total = g.backward(vars.total).unwrap();
    for slot in 0..p.values.len() {
        let norm: f64 = total.get(slot).data().iter().map(|x| x * x).sum();
        if slot == p.layout.log_sigma {
            assert!(norm > 0.0);
        } else {
            assert_eq!(norm, 0.0, "slot {}", p.layout.names[slot]);
        }
    }
}

#[test]
fn value_head_fits_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut p = NetParams::<f64>::init(&small_net(), &mut rng).unwrap();
    let mut mb = on_policy_batch(&p, 32, &mut rng);
    let targets: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    mb.returns = Array::from_f64(&[32], &targets).unwrap();
    // a wide value clip so the plain squared error drives the fit
    let cfg = PpoConfig {
        value_clip: Some(1e6),
        ..PpoConfig::default()
    };
    let mut adam = AdamState::new(
        &p.values,
        AdamConfig {
            lr: 3e-3,
            ..AdamConfig::default()
        },
    );
    let loss_at = |p: &NetParams<f64>| {
        let mut g = Graph::new(&p.values);
        let v = ppo_graph(&mut g, &p.layout, &p.config, &mb, &cfg).unwrap();
        g.value(v.value).item()
    };
    let start = loss_at(&p);
    for _ in 0..200 {
        let grads = {
            let mut g = Graph::new(&p.values);
            let v = ppo_graph(&mut g, &p.layout, &p.config, &mb, &cfg).unwrap();
            g.backward(v.value).unwrap()
        };
        adam.step(&mut p.values, &grads).unwrap();
    }
    let end = loss_at(&p);
    assert!(end < 0.1 * start, "value loss {start} -> {end}");
}

#[test]
fn training_run_writes_loadable_checkpoints_and_curves() {
    let cfg = RunConfig::from_toml_str(include_str!("../configs/toy.toml")).unwrap();
    cfg.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut trainer = Trainer::new(&cfg.scenario, &cfg.net, &cfg.train, &cfg.reward).unwrap();
    let mut seen = Vec::new();
    let out = trainer.run(Some(dir.path()), |s| seen.push(s.iteration)).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    let names: Vec<String> = out
        .checkpoints
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["iter_00000.lstp", "iter_00002.lstp", "iter_00003.lstp"]);
    let last = NetParams::<f32>::load_matching(out.checkpoints.last().unwrap(), &cfg.net).unwrap();
    assert_eq!(last, trainer.params);
    let curves = std::fs::read_to_string(dir.path().join("curves.jsonl")).unwrap();
    assert_eq!(curves.lines().count(), 3);
    for line in curves.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["mean_reward"].as_f64().unwrap().is_finite());
    }
}
