//! Central-difference verification of graph gradients.

use rand::Rng;

use super::graph::{Graph, Var};
use super::{Array, TensorError};

/// Outcome of comparing analytic and numeric derivatives at sampled
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(param slot, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Relative error with a small floor so that two near-zero derivatives do
/// not register as a mismatch.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compare `backward` against `(f(p + h) - f(p - h)) / 2h` at `points`
/// parameter coordinates drawn uniformly over all scalars.
pub fn check_gradients<R, F>(
    params: &[Array<f64>],
    loss: F,
    points: usize,
    step: f64,
    rng: &mut R,
) -> Result<GradCheck, TensorError>
where
    R: Rng,
    F: Fn(&mut Graph<'_, f64>) -> Result<Var, TensorError>,
{
    let total: usize = params.iter().map(Array::len).sum();
    if total == 0 {
        return Err(TensorError::Contract("no parameters to check".into()));
    }
    let eval = |p: &[Array<f64>]| -> Result<f64, TensorError> {
        let mut g = Graph::new(p);
        let l = loss(&mut g)?;
        Ok(g.value(l).item())
    };
    let grads = {
        let mut g = Graph::new(params);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let mut work = params.to_vec();
    let mut report = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for _ in 0..points {
        let mut k = rng.random_range(0..total);
        let mut slot = 0;
        while k >= work[slot].len() {
            k -= work[slot].len();
            slot += 1;
        }
        let orig = work[slot].data()[k];
        work[slot].data_mut()[k] = orig + step;
        let up = eval(&work)?;
        work[slot].data_mut()[k] = orig - step;
        let down = eval(&work)?;
        work[slot].data_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        let analytic = grads.get(slot).data()[k];
        let err = relative_error(analytic, numeric);
        report.checked += 1;
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((slot, k, analytic, numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn detects_correct_and_wrong_gradients() {
        let params = vec![Array::from_f64(&[2, 2], &[0.3, -0.7, 1.1, 0.2]).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ok = check_gradients(
            &params,
            |g| {
                let p = g.param(0)?;
                let t = g.tanh(p)?;
                let m = g.matmul(t, p)?;
                let s = g.square(m)?;
                g.reduce_sum(s)
            },
            10,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(ok.passes(1e-6), "{ok:?}");
        // the factor makes the forward value disagree with its own gradient
        let wrong = check_gradients(
            &params,
            |g| {
                let p = g.param(0)?;
                let s = g.reduce_sum(p)?;
                let c = g.input(Array::scalar(1.0 + g.value(p).data()[0]))?;
                g.mul(s, c)
            },
            10,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(!wrong.passes(1e-3));
    }
}
