//! Gibbs sweeps over latent expression values and global parameters.

use rand::Rng;

use crate::error::Result;
use crate::model::PriorConfig;
use crate::stats::{mean, sample_variance};
use crate::samplers::{
    missing_interior_posterior, missing_stage1_posterior, missing_terminal_posterior, mu2_posterior,
    mu_gr_posterior, sample_person_block, sigma1_posterior, sigma2_posterior, GaussianPosterior,
    ModelState,
};

/// Full conditional of the value of target `k` at `layer` for person `e`.
fn value_posterior(state: &ModelState, e: usize, k: usize, layer: usize) -> Result<GaussianPosterior> {
    let death = state.data.persons[e].death_stage;
    if layer + 1 == death {
        missing_terminal_posterior(state, e, k)
    } else if layer == 0 {
        missing_stage1_posterior(state, e, k)
    } else {
        missing_interior_posterior(state, e, k, layer)
    }
}

fn resample_cell<R: Rng + ?Sized>(
    state: &mut ModelState,
    e: usize,
    k: usize,
    layer: usize,
    rng: &mut R,
) -> Result<()> {
    let kk = state.data.targets();
    if state.data.persons[e].observed[layer * kk + k] {
        return Ok(());
    }
    let post = value_posterior(state, e, k, layer)?;
    state.data.persons[e].values[layer * kk + k] = post.sample(rng);
    Ok(())
}

/// Redraws the unobserved values at `layer` for every person that lives
/// past it, i.e. the source layer of transition `layer`.
pub fn resample_layer<R: Rng + ?Sized>(
    state: &mut ModelState,
    layer: usize,
    rng: &mut R,
) -> Result<()> {
    let kk = state.data.targets();
    for e in 0..state.data.persons.len() {
        if state.data.persons[e].death_stage < layer + 2 {
            continue;
        }
        for k in 0..kk {
            resample_cell(state, e, k, layer, rng)?;
        }
    }
    Ok(())
}

/// Redraws every unobserved value, one person at a time, each person's
/// values jointly.
pub fn resample_all_missing<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) -> Result<()> {
    for e in 0..state.data.persons.len() {
        sample_person_block(state, e, rng)?;
    }
    Ok(())
}

/// Redraws `μ`, `σ₁²`, `μ₂` and `σ₂²` from their full conditionals, in that order.
pub fn update_params<R: Rng + ?Sized>(
    state: &mut ModelState,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    for k in 0..state.data.targets() {
        state.params.mu[k] = mu_gr_posterior(state, k, prior)?.sample(rng);
    }
    state.params.sigma1_sq = sigma1_posterior(state, prior)?.sample(rng);
    state.params.mu2 = mu2_posterior(state, prior)?.sample(rng);
    state.params.sigma2_sq = sigma2_posterior(state, prior)?.sample(rng);
    Ok(())
}

/// Starting values for the unobserved cells. An earlier layer of a person
/// takes the person's death-stage value standardised within its stage and
/// mapped onto the observed mean and spread of the earlier stage, so that
/// cross-person variation survives. Unobserved death-stage cells take the
/// observed mean of their stage, or `fallback` when the stage has none.
pub fn initial_fill(state: &mut ModelState, fallback: f64) {
    let kk = state.data.targets();
    let stages = state.data.dims.stages;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); stages * kk];
    for p in &state.data.persons {
        let layer = p.death_stage - 1;
        for k in 0..kk {
            if p.observed[layer * kk + k] {
                cells[layer * kk + k].push(p.values[layer * kk + k]);
            }
        }
    }
    let moments: Vec<Option<(f64, f64)>> = cells
        .iter()
        .map(|v| (!v.is_empty()).then(|| (mean(v), sample_variance(v).sqrt())))
        .collect();
    for p in &mut state.data.persons {
        let last = p.death_stage - 1;
        for k in 0..kk {
            let here = moments[last * kk + k];
            let anchor = if p.observed[last * kk + k] {
                p.values[last * kk + k]
            } else {
                let v = here.map_or(fallback, |m| m.0);
                p.values[last * kk + k] = v;
                v
            };
            for layer in 0..last {
                if p.observed[layer * kk + k] {
                    continue;
                }
                p.values[layer * kk + k] = match (moments[layer * kk + k], here) {
                    (Some((m0, s0)), Some((m1, s1))) if s1 > 0.0 => m0 + s0 / s1 * (anchor - m1),
                    (Some((m0, _)), Some((m1, _))) => anchor + m0 - m1,
                    _ => anchor,
                };
            }
        }
    }
}
