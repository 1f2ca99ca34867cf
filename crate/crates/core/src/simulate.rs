//! Forward simulation from the generative model.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    Coef, Dims, ExpressionDataset, GlobalParams, Person, PriorConfig, RegulationCoefficients,
    RegulatoryModel,
};
use crate::stats::{sample_inv_gamma, sample_normal, sample_probs};

/// Random network: every (target, transition) is regulated with probability
/// `density`, by a source drawn uniformly from the admissible ones.
pub fn generate_network<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &Dims,
    density: f64,
) -> Result<RegulatoryModel> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput(format!("density {density} outside [0, 1]")));
    }
    let k = dims.targets();
    let mut model = RegulatoryModel::empty(dims);
    if k < 2 {
        return Ok(model);
    }
    for t in 0..dims.transitions() {
        for target in 0..k {
            if rng.random::<f64>() < density {
                let mut s = rng.random_range(0..k - 1);
                if s >= target {
                    s += 1;
                }
                model.set_source(t, target, Some(s));
            }
        }
    }
    Ok(model)
}

/// Draws a regulatory model from the indicator prior.
pub fn sample_model_prior<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &Dims,
    prior: &PriorConfig,
) -> RegulatoryModel {
    let k = dims.targets();
    let mut model = RegulatoryModel::empty(dims);
    for t in 0..dims.transitions() {
        for target in 0..k {
            let configs: Vec<Option<usize>> = std::iter::once(None)
                .chain(model.admissible_sources(target).map(Some))
                .collect();
            let probs: Vec<f64> = configs
                .iter()
                .map(|c| {
                    prior
                        .indicator_prior
                        .log_prob(dims.genes, dims.regions, target, *c)
                        .exp()
                })
                .collect();
            model.set_source(t, target, configs[sample_probs(rng, &probs)]);
        }
    }
    model
}

/// Coefficients for every regulation of `model`: one shared `σ² ~ IG(v/2, 2vλ)`,
/// then `(a, b) ~ N(α, σ² diag(V^a, v²/V^b))` independently.
pub fn generate_coefficients<R: Rng + ?Sized>(
    rng: &mut R,
    model: &RegulatoryModel,
    prior: &PriorConfig,
) -> RegulationCoefficients {
    let mut coeffs = RegulationCoefficients::empty_for(model);
    if model.total_regulations() == 0 {
        return coeffs;
    }
    let sigma_sq = sample_inv_gamma(rng, prior.v / 2.0, 2.0 * prior.v * prior.lambda);
    let (sa, sb) = prior.coef_scales();
    for t in 0..model.transitions() {
        for k in 0..model.targets() {
            if model.source(t, k).is_some() {
                let a = sample_normal(rng, prior.alpha_a, sigma_sq * sa);
                let b = sample_normal(rng, prior.alpha_b, sigma_sq * sb);
                coeffs.set(t, k, Some(Coef { a, b }));
            }
        }
    }
    coeffs
}

/// Draws global parameters from their priors.
pub fn sample_params_prior<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &Dims,
    prior: &PriorConfig,
) -> GlobalParams {
    GlobalParams {
        mu: (0..dims.targets())
            .map(|_| sample_normal(rng, prior.c, prior.d))
            .collect(),
        sigma1_sq: sample_inv_gamma(rng, prior.p1, prior.q1),
        mu2: sample_normal(rng, prior.c2, prior.d2),
        sigma2_sq: sample_inv_gamma(rng, prior.p2, prior.q2),
    }
}

/// Simulates one dataset. Persons are ordered by death stage and numbered
/// from 1. Each person is observed only at their death stage; earlier layers
/// are kept as unobserved ground truth.
pub fn simulate_dataset<R: Rng + ?Sized>(
    model: &RegulatoryModel,
    coeffs: &RegulationCoefficients,
    params: &GlobalParams,
    dims: &Dims,
    rng: &mut R,
) -> Result<ExpressionDataset> {
    dims.check()?;
    params.check()?;
    if !coeffs.matches(model) {
        return Err(Error::InvalidInput(
            "coefficients do not match the regulated entries of the model".into(),
        ));
    }
    let k = dims.targets();
    let mut persons = Vec::with_capacity(dims.total_persons());
    let mut id = 1u64;
    for (stage0, &n) in dims.per_stage.iter().enumerate() {
        for _ in 0..n {
            let mut p = Person::new(id, stage0 + 1, k);
            fill_person(&mut p, model, coeffs, params, k, rng);
            let last = stage0 * k;
            p.observed[last..last + k].iter_mut().for_each(|o| *o = true);
            persons.push(p);
            id += 1;
        }
    }
    Ok(ExpressionDataset {
        dims: dims.clone(),
        persons,
    })
}

/// Redraws every value of `dataset` from the model, keeping persons and
/// observation masks.
pub fn resimulate_values<R: Rng + ?Sized>(
    dataset: &mut ExpressionDataset,
    model: &RegulatoryModel,
    coeffs: &RegulationCoefficients,
    params: &GlobalParams,
    rng: &mut R,
) {
    let k = dataset.targets();
    for p in &mut dataset.persons {
        fill_person(p, model, coeffs, params, k, rng);
    }
}

fn fill_person<R: Rng + ?Sized>(
    p: &mut Person,
    model: &RegulatoryModel,
    coeffs: &RegulationCoefficients,
    params: &GlobalParams,
    k: usize,
    rng: &mut R,
) {
    for target in 0..k {
        p.values[target] = sample_normal(rng, params.mu[target], params.sigma1_sq);
    }
    for layer in 1..p.death_stage {
        let t = layer - 1;
        for target in 0..k {
            let prev = p.values[t * k + target];
            let mean = match (model.source(t, target), coeffs.get(t, target)) {
                (Some(s), Some(c)) => c.a + c.b * p.values[t * k + s],
                _ => params.mu2,
            };
            p.values[layer * k + target] = prev + sample_normal(rng, mean, params.sigma2_sq);
        }
    }
}
