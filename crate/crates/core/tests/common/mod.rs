#![allow(dead_code)]

use rand::Rng;
use stagenet::samplers::ModelState;
use stagenet::simulate::{generate_coefficients, generate_network, simulate_dataset};
use stagenet::{Dims, GlobalParams, PriorConfig};

/// A small random state with every value filled: random network,
/// coefficients from the prior and parameters around the usual scale.
pub fn random_state<R: Rng>(rng: &mut R, stages: usize) -> ModelState {
    let genes = rng.random_range(1..=2);
    let regions = rng.random_range(2..=3);
    let per_stage = (0..stages).map(|_| rng.random_range(1..=4)).collect();
    let dims = Dims::new(stages, genes, regions, per_stage).unwrap();
    let prior = PriorConfig::default();
    let model = generate_network(rng, &dims, 0.5).unwrap();
    let coeffs = generate_coefficients(rng, &model, &prior);
    let params = GlobalParams {
        mu: (0..dims.targets()).map(|_| rng.random_range(3.0..7.0)).collect(),
        sigma1_sq: rng.random_range(0.3..2.0),
        mu2: rng.random_range(-1.0..1.0),
        sigma2_sq: rng.random_range(0.3..2.0),
    };
    let data = simulate_dataset(&model, &coeffs, &params, &dims, rng).unwrap();
    ModelState {
        data,
        model,
        coeffs,
        params,
    }
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Log density of every value in the state given model, coefficients and
/// parameters, written out from the generative definition.
pub fn data_loglik(state: &ModelState) -> f64 {
    let kk = state.data.targets();
    let p = &state.params;
    let mut ll = 0.0;
    for person in &state.data.persons {
        let v = &person.values;
        for k in 0..kk {
            ll += normal_logpdf(v[k], p.mu[k], p.sigma1_sq);
        }
        for t in 0..person.death_stage - 1 {
            for k in 0..kk {
                let mean = match (state.model.source(t, k), state.coeffs.get(t, k)) {
                    (Some(s), Some(c)) => c.a + c.b * v[t * kk + s],
                    _ => p.mu2,
                };
                ll += normal_logpdf(v[(t + 1) * kk + k] - v[t * kk + k], mean, p.sigma2_sq);
            }
        }
    }
    ll
}

/// Mean and variance of the density proportional to `exp(logf)`, by
/// Simpson's rule: a coarse pass over `[lo, hi]` locates the mass, a fine
/// pass over ±12 standard deviations measures it.
pub fn grid_moments(mut logf: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut pass = |lo: f64, hi: f64, n: usize| {
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let lf: Vec<f64> = xs.iter().map(|&x| logf(x)).collect();
        let top = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (i, (&x, &l)) in xs.iter().zip(&lf).enumerate() {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let f = w * (l - top).exp();
            z += f;
            m1 += f * x;
            m2 += f * x * x;
        }
        let mean = m1 / z;
        (mean, m2 / z - mean * mean)
    };
    let (m, v) = pass(lo, hi, 40_000);
    let sd = v.sqrt();
    pass(m - 12.0 * sd, m + 12.0 * sd, 4_000)
}
