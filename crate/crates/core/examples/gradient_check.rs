//! Compare reverse-mode gradients of the full PPO loss against central
//! differences for each network variant.
//!
//! ```text
//! cargo run --release --example gradient_check -- 50
//! ```

use anyhow::Result;
use lstp_nav::net::model::{forward, ObsBatch};
use lstp_nav::net::{NetConfig, NetParams, Variant};
use lstp_nav::tensor::{check_gradients, Array, GradCheck, Graph, TensorError};
use lstp_nav::train::{ppo_graph, Minibatch, PpoConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Check `points` random coordinates per variant; returns one report each.
pub fn run_example(points: usize) -> Result<Vec<(Variant, GradCheck)>> {
    let mut reports = Vec::new();
    for variant in [Variant::Lstp, Variant::Gru, Variant::Linear] {
        let cfg = NetConfig {
            n_laser: 6,
            stack: 3,
            d_h: 4,
            gru_layers: 2,
            heads: 2,
            enc_dim: 4,
            actor_hidden: vec![5],
            critic_hidden: vec![5],
            variant,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = NetParams::<f64>::init(&cfg, &mut rng)?;
        let batch = 4;
        let mut uniform =
            |n: usize, lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let obs = ObsBatch {
            scans: Array::from_f64(
                &[batch, cfg.stack, cfg.n_laser],
                &uniform(batch * cfg.stack * cfg.n_laser, 0.0, 1.0),
            )?,
            state: Array::from_f64(&[batch, 4], &uniform(batch * 4, -1.0, 1.0))?,
        };
        let actions = Array::from_f64(&[batch, 2], &uniform(batch * 2, -1.0, 1.0))?;

        // stored log-probabilities slightly off the current policy so the
        // ratio term is not trivially one
        let mut g = Graph::new(&params.values);
        let s = g.input(obs.scans.clone())?;
        let st = g.input(obs.state.clone())?;
        let f = forward(&mut g, &params.layout, &cfg, s, st)?;
        let a = g.input(actions.clone())?;
        let lp = g.gaussian_log_prob(a, f.mu, f.log_sigma)?;
        let old_logp: Vec<f64> = g.value(lp).to_f64_vec().iter().map(|l| l + 0.05).collect();
        let values = g.value(f.value).to_f64_vec();

        let mb = Minibatch {
            obs,
            actions,
            old_logp: Array::from_f64(&[batch], &old_logp)?,
            advantages: Array::from_f64(&[batch], &uniform(batch, -1.0, 1.0))?,
            returns: Array::from_f64(&[batch], &uniform(batch, -1.0, 1.0))?,
            old_values: Array::from_f64(&[batch], &values)?,
        };
        let ppo = PpoConfig::default();
        let report = check_gradients(
            &params.values,
            |g| {
                ppo_graph(g, &params.layout, &cfg, &mb, &ppo)
                    .map(|v| v.total)
                    .map_err(|e| TensorError::Contract(e.to_string()))
            },
            points,
            1e-6,
            &mut ChaCha8Rng::seed_from_u64(5),
        )?;
        reports.push((variant, report));
    }
    Ok(reports)
}

fn main() -> Result<()> {
    let points = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    for (variant, r) in run_example(points)? {
        println!(
            "{:<7} {} coordinates, max relative error {:.2e} {}",
            variant.name(),
            r.checked,
            r.max_rel_error,
            if r.passes(1e-3) { "ok" } else { "MISMATCH" }
        );
    }
    Ok(())
}
