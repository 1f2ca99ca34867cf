//! With coefficients and parameters held fixed, the model posterior given
//! only the observed values can be enumerated through the per-person
//! marginal densities. The chain's configuration frequencies must match it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stagenet::engine::{Chain, ExactPosterior, McmcConfig, MoveScoring, UpdateFlags};
use stagenet::samplers::{person_marginal_loglik, CoefficientTable, ModelState};
use stagenet::simulate::simulate_dataset;
use stagenet::stats::logsumexp;
use stagenet::{Coef, Dims, GlobalParams, PriorConfig, RegulationCoefficients, RegulatoryModel};

fn table(transitions: usize, kk: usize) -> CoefficientTable {
    let mut table = CoefficientTable::new(transitions, kk, Coef { a: 0.0, b: 0.0 });
    for t in 0..transitions {
        for k in 0..kk {
            for s in 0..kk {
                let b = 0.9 - 0.35 * ((t + 2 * k + s) % 4) as f64;
                table.set(t, k, s, Coef { a: -b * 5.0 + 0.2, b });
            }
        }
    }
    table
}

/// Posterior over every model by brute force.
fn enumerate(state: &ModelState, table: &CoefficientTable, prior: &PriorConfig) -> ExactPosterior {
    let dims = &state.data.dims;
    let kk = dims.targets();
    let transitions = dims.transitions();
    let mut post = ExactPosterior {
        transitions,
        targets: kk,
        probs: Vec::new(),
    };
    let n_models = kk.pow((kk * transitions) as u32);
    let mut logp = Vec::with_capacity(n_models);
    for i in 0..n_models {
        let configs = post.configs(i);
        let mut s = state.clone();
        let mut lp = 0.0;
        for t in 0..transitions {
            for k in 0..kk {
                let src = stagenet::samplers::config_source(k, configs[t * kk + k]);
                s.model.set_source(t, k, src);
                s.coeffs.set(t, k, src.map(|src| table.get(t, k, src)));
                lp += prior.indicator_prior.log_prob(dims.genes, dims.regions, k, src);
            }
        }
        for e in 0..s.data.persons.len() {
            lp += person_marginal_loglik(&s, e).unwrap();
        }
        logp.push(lp);
    }
    let z = logsumexp(&logp);
    post.probs = logp.iter().map(|l| (l - z).exp()).collect();
    post
}

#[test]
fn integrated_moves_match_enumeration_with_latent_values() {
    let dims = Dims::new(3, 3, 1, vec![6, 6, 10]).unwrap();
    let prior = PriorConfig::default();
    let table = table(2, 3);
    let mut truth = RegulatoryModel::empty(&dims);
    truth.set_source(0, 1, Some(0));
    truth.set_source(1, 2, Some(1));
    let mut coeffs = RegulationCoefficients::empty_for(&truth);
    coeffs.set(0, 1, Some(table.get(0, 1, 0)));
    coeffs.set(1, 2, Some(table.get(1, 2, 1)));
    let params = GlobalParams::uniform(&dims, 5.0, 1.0, 0.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = simulate_dataset(&truth, &coeffs, &params, &dims, &mut rng).unwrap();
    let config = McmcConfig {
        outer: 4000,
        inner: 10,
        burn_in: 2000,
        warmup: 0,
        seed: 9,
        scoring: MoveScoring::Integrated,
        updates: UpdateFlags {
            params: false,
            ..UpdateFlags::default()
        },
        ..McmcConfig::default()
    };
    let mut chain = Chain::new(&data.observed_only(), &prior, &config)
        .unwrap()
        .with_fixed_coefficients(&table);
    chain.state.params = params.clone();
    let exact = enumerate(&chain.state, &table, &prior);
    chain.run().unwrap();
    let summary = chain.summary();
    for t in 0..2 {
        for k in 0..3 {
            let want = exact.marginal(t, k);
            let got = &summary.frequencies[t][k];
            let tv: f64 = want.iter().zip(got).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 0.05, "transition {t} target {k}: {got:?} vs {want:?}");
        }
    }
}

/// `log ∫ IG(σ²) Π_k p(y_k | m, σ²) dσ²` for complete data, with every
/// regulation's coefficients integrated out under the shared `σ²`.
fn collapsed_model_loglik(
    state: &ModelState,
    model: &RegulatoryModel,
    prior: &PriorConfig,
) -> f64 {
    use stagenet::samplers::{PairData, SigmaGrid, TransitionStats};
    let kk = state.data.targets();
    let grid = SigmaGrid::new(prior.v / 2.0, 2.0 * prior.v * prior.lambda);
    let s2 = state.params.sigma2_sq;
    let mut nodes: Vec<f64> = grid.log_weights.clone();
    for t in 0..state.data.dims.transitions() {
        let stats = TransitionStats::new(&state.data, t).unwrap();
        for k in 0..kk {
            match model.source(t, k) {
                None => {
                    let ll = stats.null_loglik(k, state.params.mu2, s2);
                    nodes.iter_mut().for_each(|n| *n += ll);
                }
                Some(s) => {
                    let pair: PairData = stats.pair(k, s);
                    for (n, &sig) in nodes.iter_mut().zip(&grid.sigma_sq) {
                        let single = SigmaGrid {
                            shape: grid.shape,
                            scale: grid.scale,
                            sigma_sq: vec![sig],
                            log_weights: vec![0.0],
                        };
                        *n += pair.collapsed_loglik(&single, prior, s2).unwrap();
                    }
                }
            }
        }
    }
    logsumexp(&nodes)
}

#[test]
fn integrated_moves_match_enumeration_with_collapsed_coefficients() {
    let dims = Dims::new(3, 3, 1, vec![0, 8, 12]).unwrap();
    let prior = PriorConfig::default();
    let mut truth = RegulatoryModel::empty(&dims);
    truth.set_source(0, 1, Some(0));
    truth.set_source(1, 2, Some(1));
    let mut coeffs = RegulationCoefficients::empty_for(&truth);
    coeffs.set(0, 1, Some(Coef { a: -2.0, b: 0.5 }));
    coeffs.set(1, 2, Some(Coef { a: 3.0, b: -0.6 }));
    let params = GlobalParams::uniform(&dims, 5.0, 1.0, 0.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut data = simulate_dataset(&truth, &coeffs, &params, &dims, &mut rng).unwrap();
    for p in &mut data.persons {
        p.observed.iter_mut().for_each(|o| *o = true);
    }
    let config = McmcConfig {
        outer: 4000,
        inner: 10,
        burn_in: 2000,
        warmup: 0,
        seed: 4,
        scoring: MoveScoring::Integrated,
        updates: UpdateFlags {
            params: false,
            ..UpdateFlags::default()
        },
        ..McmcConfig::default()
    };
    let mut chain = Chain::new(&data, &prior, &config).unwrap();
    chain.state.params = params.clone();

    let kk = 3;
    let mut exact = ExactPosterior {
        transitions: 2,
        targets: kk,
        probs: Vec::new(),
    };
    let mut logp = Vec::new();
    for i in 0..kk.pow(6) {
        let configs = exact.configs(i);
        let mut model = RegulatoryModel::empty(&dims);
        let mut lp = 0.0;
        for t in 0..2 {
            for k in 0..kk {
                let src = stagenet::samplers::config_source(k, configs[t * kk + k]);
                model.set_source(t, k, src);
                lp += prior.indicator_prior.log_prob(3, 1, k, src);
            }
        }
        logp.push(lp + collapsed_model_loglik(&chain.state, &model, &prior));
    }
    let z = logsumexp(&logp);
    exact.probs = logp.iter().map(|l| (l - z).exp()).collect();

    chain.run().unwrap();
    let summary = chain.summary();
    for t in 0..2 {
        for k in 0..kk {
            let want = exact.marginal(t, k);
            let got = &summary.frequencies[t][k];
            let tv: f64 = want.iter().zip(got).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 0.05, "transition {t} target {k}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn integrated_moves_match_prior_sampled_evidence_with_latent_values() {
    use stagenet::stats::{sample_inv_gamma, sample_normal};
    let dims = Dims::new(2, 2, 1, vec![4, 6]).unwrap();
    let prior = PriorConfig::default();
    let mut truth = RegulatoryModel::empty(&dims);
    truth.set_source(0, 1, Some(0));
    let mut coeffs = RegulationCoefficients::empty_for(&truth);
    coeffs.set(0, 1, Some(Coef { a: -2.4, b: 0.5 }));
    let params = GlobalParams::uniform(&dims, 5.0, 1.0, 0.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = simulate_dataset(&truth, &coeffs, &params, &dims, &mut rng).unwrap();

    let config = McmcConfig {
        outer: 20_000,
        inner: 5,
        burn_in: 10_000,
        warmup: 0,
        seed: 5,
        scoring: MoveScoring::Integrated,
        updates: UpdateFlags {
            params: false,
            ..UpdateFlags::default()
        },
        ..McmcConfig::default()
    };
    let mut chain = Chain::new(&data.observed_only(), &prior, &config).unwrap();
    chain.state.params = params.clone();

    // evidence of each of the four models by averaging the likelihood
    // over prior draws of the shared variance and the coefficients
    let (sa, sb) = prior.coef_scales();
    let draws = 200_000;
    let mut log_evidence = Vec::new();
    let mut state = chain.state.clone();
    for i in 0..4 {
        let sources = [(i & 1 == 1).then_some(1), (i & 2 == 2).then_some(0)];
        for (k, s) in sources.iter().enumerate() {
            state.model.set_source(0, k, *s);
        }
        let mut lls = Vec::with_capacity(draws);
        for _ in 0..draws {
            let s2 = sample_inv_gamma(&mut rng, prior.v / 2.0, 2.0 * prior.v * prior.lambda);
            for (k, s) in sources.iter().enumerate() {
                state.coeffs.set(
                    0,
                    k,
                    s.map(|_| Coef {
                        a: sample_normal(&mut rng, prior.alpha_a, s2 * sa),
                        b: sample_normal(&mut rng, prior.alpha_b, s2 * sb),
                    }),
                );
            }
            let ll: f64 = (0..state.data.persons.len())
                .map(|e| person_marginal_loglik(&state, e).unwrap())
                .sum();
            lls.push(ll);
        }
        let lp: f64 = sources
            .iter()
            .enumerate()
            .map(|(k, s)| prior.indicator_prior.log_prob(2, 1, k, *s))
            .sum();
        log_evidence.push(lp + logsumexp(&lls) - (draws as f64).ln());
    }
    let z = logsumexp(&log_evidence);
    let probs: Vec<f64> = log_evidence.iter().map(|l| (l - z).exp()).collect();
    let want = [
        [probs[0] + probs[2], probs[1] + probs[3]],
        [probs[0] + probs[1], probs[2] + probs[3]],
    ];

    chain.run().unwrap();
    let summary = chain.summary();
    for k in 0..2 {
        let got = &summary.frequencies[0][k];
        let tv = (got[0] - want[k][0]).abs();
        assert!(tv < 0.03, "target {k}: {got:?} vs {:?}", want[k]);
    }
}
