//! Build the full-size network, run one observation through it, and time
//! single-observation inference.

use std::time::Instant;

use anyhow::Result;
use lstp_nav::net::model::ObsBatch;
use lstp_nav::net::{param_count, NetConfig, NetParams, PolicyOutput};
use lstp_nav::tensor::Array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ForwardDemo {
    pub parameters: usize,
    pub output: PolicyOutput,
    pub mean_ms: f64,
}

pub fn run_example(repeats: usize) -> Result<ForwardDemo> {
    let cfg = NetConfig::default();
    let params = NetParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    // an open corridor ahead, goal 3 m away slightly to the left
    let scans: Vec<f32> = (0..cfg.stack * cfg.n_laser)
        .map(|i| {
            if (i % cfg.n_laser).abs_diff(cfg.n_laser / 2) < 20 {
                1.0
            } else {
                0.4
            }
        })
        .collect();
    let obs = ObsBatch {
        scans: Array::new(&[1, cfg.stack, cfg.n_laser], scans)?,
        state: Array::new(&[1, 4], vec![0.3, 0.0, 3.0, 0.2])?,
    };
    let output = params.infer(&obs)?[0];
    let start = Instant::now();
    for _ in 0..repeats {
        std::hint::black_box(params.infer(&obs)?);
    }
    Ok(ForwardDemo {
        parameters: param_count(&cfg)?,
        output,
        mean_ms: 1e3 * start.elapsed().as_secs_f64() / repeats.max(1) as f64,
    })
}

fn main() -> Result<()> {
    let d = run_example(200)?;
    println!("parameters: {}", d.parameters);
    println!(
        "mean action [{:.3}, {:.3}], sigma [{:.3}, {:.3}], value {:.3}",
        d.output.mu[0], d.output.mu[1], d.output.sigma[0], d.output.sigma[1], d.output.value
    );
    println!("{:.3} ms per forward, {:.0} per second", d.mean_ms, 1e3 / d.mean_ms);
    Ok(())
}
