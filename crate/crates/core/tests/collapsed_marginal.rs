//! The collapsed regulated marginal against its limits and against plain
//! Monte Carlo over the coefficient prior.

mod common;

use common::{normal_logpdf, random_state};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use stagenet::samplers::{null_marginal_loglik, regulated_marginal_loglik, ModelState};
use stagenet::simulate::resimulate_values;
use stagenet::{Coef, Dims, ExpressionDataset, GlobalParams, Person, PriorConfig};
use stagenet::{RegulationCoefficients, RegulatoryModel};

#[test]
fn vanishing_coefficient_prior_recovers_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let mut done = 0;
    while done < 20 {
        let mut state = random_state(&mut rng, 3);
        let kk = state.data.targets();
        let t = rng.random_range(0..2);
        if state.data.participants(t).next().is_none() {
            continue;
        }
        let target = rng.random_range(0..kk);
        let source = (target + rng.random_range(1..kk)) % kk;
        // data drawn with the target unregulated at t
        state.model.set_source(t, target, None);
        state.coeffs.set(t, target, None);
        let (model, coeffs, params) = (state.model.clone(), state.coeffs.clone(), state.params.clone());
        resimulate_values(&mut state.data, &model, &coeffs, &params, &mut rng);
        let v = 1e-10;
        let prior = PriorConfig {
            v_a: v,
            v_b: 2.0f64.powi(2) / v,
            v: 2.0,
            alpha_a: state.params.mu2,
            alpha_b: 0.0,
            ..PriorConfig::default()
        };
        // other regulations sit at the prior location so the shared scale
        // keeps its prior
        let located = Coef {
            a: prior.alpha_a,
            b: prior.alpha_b,
        };
        for (tt, k, _) in state.coeffs.iter().collect::<Vec<_>>() {
            state.coeffs.set(tt, k, Some(located));
        }
        let regulated = regulated_marginal_loglik(&state, target, source, t, &prior).unwrap();
        let null = null_marginal_loglik(&state, target, t);
        assert!(
            (regulated - null).abs() < 1e-6,
            "instance {done}: {regulated} vs {null}"
        );
        done += 1;
    }
}

/// Increments far from `mu2` with no other regulation: the shared scale
/// then has an infinite prior mean and a gap to the null remains at tiny
/// `V`. Expected value by adaptive quadrature over the scale of the exact
/// Gaussian marginal at 40 digits.
#[test]
fn tiny_prior_scale_against_quadrature() {
    let pts = [
        (4.230120515114541, -4.98470609522826),
        (4.993550270028448, -1.2528681250869438),
        (7.030121455523649, -3.3338114207196545),
        (6.421769668091802, -3.133664984095381),
        (6.940474044525183, -2.1473412661178775),
    ];
    let dims = Dims::new(2, 1, 2, vec![0, pts.len()]).unwrap();
    let persons = pts
        .iter()
        .enumerate()
        .map(|(i, &(src, d))| {
            let mut p = Person::new(i as u64 + 1, 2, 2);
            p.values = vec![src, 0.0, src, d];
            p
        })
        .collect();
    let model = RegulatoryModel::empty(&dims);
    let mu2 = 0.3243715727795857;
    let state = ModelState {
        coeffs: RegulationCoefficients::empty_for(&model),
        model,
        params: GlobalParams::uniform(&dims, 5.0, 1.0, mu2, 1.915342376432871),
        data: ExpressionDataset { dims, persons },
    };
    let prior = PriorConfig {
        v_a: 1e-10,
        v_b: 4.0 / 1e-10,
        alpha_a: mu2,
        alpha_b: 0.0,
        ..PriorConfig::default()
    };
    let regulated = regulated_marginal_loglik(&state, 1, 0, 0, &prior).unwrap();
    let null = null_marginal_loglik(&state, 1, 0);
    assert!((regulated - -22.436789784183755).abs() < 1e-9, "{regulated}");
    assert!((null - -22.436814811631786).abs() < 1e-9, "{null}");
}

#[test]
fn monte_carlo_matches_closed_form_on_two_observations() {
    let dims = Dims::new(2, 1, 2, vec![0, 2]).unwrap();
    let xs = [(4.7, 5.6), (5.4, 5.1)];
    let persons = xs
        .iter()
        .enumerate()
        .map(|(i, &(src, tgt))| {
            let mut p = Person::new(i as u64 + 1, 2, 2);
            // layer 0: source, target; layer 1: target moved by 0.8 / -0.3
            p.values = vec![src, tgt, src + 0.1, tgt + [0.8, -0.3][i]];
            p.observed = vec![false, false, true, true];
            p
        })
        .collect();
    let model = RegulatoryModel::empty(&dims);
    let state = ModelState {
        coeffs: RegulationCoefficients::empty_for(&model),
        model,
        params: GlobalParams::uniform(&dims, 5.0, 1.0, 0.1, 0.7),
        data: ExpressionDataset {
            dims,
            persons,
        },
    };
    let prior = PriorConfig::default();
    let closed = regulated_marginal_loglik(&state, 1, 0, 0, &prior).unwrap().exp();

    let (sa, sb) = (prior.v_a, prior.v * prior.v / prior.v_b);
    let gamma = Gamma::new(prior.v / 2.0, 1.0 / (2.0 * prior.v * prior.lambda)).unwrap();
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let draws = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        let sigma_sq = 1.0 / gamma.sample(&mut rng);
        let a = prior.alpha_a + (sigma_sq * sa).sqrt() * std.sample(&mut rng);
        let b = prior.alpha_b + (sigma_sq * sb).sqrt() * std.sample(&mut rng);
        let l: f64 = xs
            .iter()
            .zip([0.8, -0.3])
            .map(|(&(src, _), d)| normal_logpdf(d, a + b * src, state.params.sigma2_sq))
            .sum::<f64>()
            .exp();
        sum += l;
        sum2 += l * l;
    }
    let n = draws as f64;
    let mean = sum / n;
    let se = ((sum2 / n - mean * mean) / n).sqrt();
    assert!(
        (mean - closed).abs() < 3.0 * se,
        "monte carlo {mean} vs closed form {closed} (se {se})"
    );
}
