//! Conjugate full conditionals of the global parameters.

use crate::error::{Error, Result};
use crate::model::PriorConfig;

use super::{GaussianPosterior, InverseGammaPosterior, ModelState};

fn absent(what: &str) -> Error {
    Error::Precondition(format!("{what} contains an absent value; impute first"))
}

/// `μ_k | stage-1 values, σ₁²`.
pub fn mu_gr_posterior(
    state: &ModelState,
    k: usize,
    prior: &PriorConfig,
) -> Result<GaussianPosterior> {
    let kk = state.data.targets();
    if k >= kk {
        return Err(Error::Precondition(format!("target {k} out of range")));
    }
    let mut n = 0.0;
    let mut sum = 0.0;
    for p in &state.data.persons {
        let x = p.values[k];
        if !x.is_finite() {
            return Err(absent("stage-1 layer"));
        }
        n += 1.0;
        sum += x;
    }
    let s1 = state.params.sigma1_sq;
    Ok(GaussianPosterior::from_precision(
        n / s1 + 1.0 / prior.d,
        sum / s1 + prior.c / prior.d,
    ))
}

/// `σ₁² | stage-1 values, μ`.
pub fn sigma1_posterior(state: &ModelState, prior: &PriorConfig) -> Result<InverseGammaPosterior> {
    let kk = state.data.targets();
    let mut n = 0usize;
    let mut ss = 0.0;
    for p in &state.data.persons {
        for k in 0..kk {
            let x = p.values[k];
            if !x.is_finite() {
                return Err(absent("stage-1 layer"));
            }
            ss += (x - state.params.mu[k]).powi(2);
            n += 1;
        }
    }
    Ok(InverseGammaPosterior {
        shape: n as f64 / 2.0 + prior.p1,
        scale: ss / 2.0 + prior.q1,
    })
}

/// Visits every increment of every person as `(transition, target, person, increment)`.
fn for_each_increment(
    state: &ModelState,
    mut f: impl FnMut(usize, usize, usize, f64),
) -> Result<()> {
    let kk = state.data.targets();
    for (e, p) in state.data.persons.iter().enumerate() {
        for t in 0..p.death_stage.saturating_sub(1) {
            for k in 0..kk {
                let d = p.values[(t + 1) * kk + k] - p.values[t * kk + k];
                if !d.is_finite() {
                    return Err(absent("expression tensor"));
                }
                f(t, k, e, d);
            }
        }
    }
    Ok(())
}

/// `μ₂ | increments of unregulated targets, σ₂²`.
pub fn mu2_posterior(state: &ModelState, prior: &PriorConfig) -> Result<GaussianPosterior> {
    let mut n = 0.0;
    let mut sum = 0.0;
    for_each_increment(state, |t, k, _, d| {
        if state.model.source(t, k).is_none() {
            n += 1.0;
            sum += d;
        }
    })?;
    let s2 = state.params.sigma2_sq;
    Ok(GaussianPosterior::from_precision(
        n / s2 + 1.0 / prior.d2,
        sum / s2 + prior.c2 / prior.d2,
    ))
}

/// `σ₂² | all increments, model, coefficients, μ₂`.
pub fn sigma2_posterior(state: &ModelState, prior: &PriorConfig) -> Result<InverseGammaPosterior> {
    let mut n = 0usize;
    let mut ss = 0.0;
    for_each_increment(state, |t, k, e, d| {
        ss += (d - state.expected_increment(e, t, k)).powi(2);
        n += 1;
    })?;
    Ok(InverseGammaPosterior {
        shape: n as f64 / 2.0 + prior.p2,
        scale: ss / 2.0 + prior.q2,
    })
}
