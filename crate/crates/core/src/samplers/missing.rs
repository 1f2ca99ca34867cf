//! Full conditionals of unobserved expression values.
//!
//! Layers are 0-based: layer 0 is stage 1 and transition `t` links layer
//! `t` to layer `t + 1`.

use crate::error::{Error, Result};

use super::{GaussianPosterior, ModelState};

/// Sums over targets regulated by `k` at transition `t`: `Σ b²` and
/// `Σ b · (Δ_j − a)` where `Δ_j` is the dependent's increment.
fn dependent_terms(state: &ModelState, person: usize, t: usize, k: usize) -> (f64, f64) {
    let kk = state.data.targets();
    let values = &state.data.persons[person].values;
    let mut b_sq = 0.0;
    let mut weighted = 0.0;
    for j in 0..kk {
        if state.model.source(t, j) != Some(k) {
            continue;
        }
        if let Some(c) = state.coeffs.get(t, j) {
            let delta = values[(t + 1) * kk + j] - values[t * kk + j];
            b_sq += c.b * c.b;
            weighted += c.b * (delta - c.a);
        }
    }
    (b_sq, weighted)
}

fn check_person(state: &ModelState, person: usize, k: usize) -> Result<usize> {
    let p = state
        .data
        .persons
        .get(person)
        .ok_or_else(|| Error::Precondition(format!("no person at index {person}")))?;
    if k >= state.data.targets() {
        return Err(Error::Precondition(format!("target {k} out of range")));
    }
    Ok(p.death_stage)
}

/// Conditional of a latent stage-1 value for a person observed at stage ≥ 2:
/// combines the stage-1 prior, the target's own first increment and the
/// increments of targets it regulates over the first transition.
pub fn missing_stage1_posterior(
    state: &ModelState,
    person: usize,
    k: usize,
) -> Result<GaussianPosterior> {
    let death = check_person(state, person, k)?;
    if death < 2 {
        return Err(Error::Precondition(
            "stage-1 conditional needs a stage-2 layer".into(),
        ));
    }
    let kk = state.data.targets();
    let p = &state.data.persons[person];
    let next = p.values[kk + k];
    if !next.is_finite() {
        return Err(Error::Precondition("stage-2 neighbour value is absent".into()));
    }
    let params = &state.params;
    let own = state.expected_increment(person, 0, k);
    let (b_sq, weighted) = dependent_terms(state, person, 0, k);
    let precision = 1.0 / params.sigma1_sq + (1.0 + b_sq) / params.sigma2_sq;
    let weighted_mean =
        params.mu[k] / params.sigma1_sq + (next - own + weighted) / params.sigma2_sq;
    Ok(GaussianPosterior::from_precision(precision, weighted_mean))
}

/// Conditional of a latent value at an interior layer `1 <= layer <= death − 2`
/// (both neighbouring layers exist).
pub fn missing_interior_posterior(
    state: &ModelState,
    person: usize,
    k: usize,
    layer: usize,
) -> Result<GaussianPosterior> {
    let death = check_person(state, person, k)?;
    if layer == 0 || layer + 2 > death {
        return Err(Error::Precondition(format!(
            "layer {layer} is not interior for death stage {death}"
        )));
    }
    let kk = state.data.targets();
    let p = &state.data.persons[person];
    let prev = p.values[(layer - 1) * kk + k];
    let next = p.values[(layer + 1) * kk + k];
    if !(prev.is_finite() && next.is_finite()) {
        return Err(Error::Precondition("neighbour value is absent".into()));
    }
    let into = state.expected_increment(person, layer - 1, k);
    let out = state.expected_increment(person, layer, k);
    let (b_sq, weighted) = dependent_terms(state, person, layer, k);
    let eta = 2.0 + b_sq;
    let num = (prev + into) + (next - out) + weighted;
    Ok(GaussianPosterior {
        mean: num / eta,
        variance: state.params.sigma2_sq / eta,
    })
}

/// Conditional of an unavailable value at the death stage: the forward
/// prediction from the previous layer, or the stage-1 prior when the person
/// died at stage 1.
pub fn missing_terminal_posterior(
    state: &ModelState,
    person: usize,
    k: usize,
) -> Result<GaussianPosterior> {
    let death = check_person(state, person, k)?;
    let params = &state.params;
    if death == 1 {
        return Ok(GaussianPosterior {
            mean: params.mu[k],
            variance: params.sigma1_sq,
        });
    }
    let kk = state.data.targets();
    let layer = death - 1;
    let prev = state.data.persons[person].values[(layer - 1) * kk + k];
    if !prev.is_finite() {
        return Err(Error::Precondition("previous-layer value is absent".into()));
    }
    Ok(GaussianPosterior {
        mean: prev + state.expected_increment(person, layer - 1, k),
        variance: params.sigma2_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Coef, Dims, ExpressionDataset, GlobalParams, Person, RegulationCoefficients,
        RegulatoryModel,
    };

    /// One gene, two regions, a single person with the given layers.
    fn state(layers: &[[f64; 2]]) -> ModelState {
        let stages = layers.len().max(2);
        let mut per_stage = vec![0; stages];
        per_stage[layers.len() - 1] = 1;
        let dims = Dims::new(stages, 1, 2, per_stage).unwrap();
        let mut p = Person::new(1, layers.len(), 2);
        for (l, vals) in layers.iter().enumerate() {
            p.values[l * 2] = vals[0];
            p.values[l * 2 + 1] = vals[1];
        }
        let model = RegulatoryModel::empty(&dims);
        let coeffs = RegulationCoefficients::empty_for(&model);
        ModelState {
            data: ExpressionDataset {
                dims: dims.clone(),
                persons: vec![p],
            },
            model,
            coeffs,
            params: GlobalParams::uniform(&dims, 0.0, 1.0, 0.0, 1.0),
        }
    }

    fn close(a: GaussianPosterior, mean: f64, var: f64) {
        assert!((a.mean - mean).abs() < 1e-12, "mean {} vs {mean}", a.mean);
        assert!((a.variance - var).abs() < 1e-12, "var {} vs {var}", a.variance);
    }

    #[test]
    fn stage1_unregulated() {
        let s = state(&[[f64::NAN, 0.0], [2.0, 0.0]]);
        close(missing_stage1_posterior(&s, 0, 0).unwrap(), 1.0, 0.5);
    }

    #[test]
    fn stage1_prior_and_data_agree() {
        let mut s = state(&[[f64::NAN, 0.0], [5.0, 0.0]]);
        s.params.mu[0] = 5.0;
        close(missing_stage1_posterior(&s, 0, 0).unwrap(), 5.0, 0.5);
    }

    #[test]
    fn stage1_with_dependent() {
        // target 1 regulated by target 0 with a = 0, b = 0.5, increment 1
        let mut s = state(&[[f64::NAN, 0.0], [2.0, 1.0]]);
        s.model.set_source(0, 1, Some(0));
        s.coeffs.set(0, 1, Some(Coef { a: 0.0, b: 0.5 }));
        let post = missing_stage1_posterior(&s, 0, 0).unwrap();
        close(post, 2.5 / 2.25, 1.0 / 2.25);
    }

    #[test]
    fn interior_midpoint_and_dependent() {
        let s = state(&[[1.0, 0.0], [f64::NAN, 0.0], [3.0, 0.0]]);
        close(missing_interior_posterior(&s, 0, 0, 1).unwrap(), 2.0, 0.5);

        let mut s = state(&[[1.0, 0.0], [f64::NAN, 0.0], [3.0, 2.0]]);
        s.model.set_source(1, 1, Some(0));
        s.coeffs.set(1, 1, Some(Coef { a: 0.0, b: 1.0 }));
        close(missing_interior_posterior(&s, 0, 0, 1).unwrap(), 2.0, 1.0 / 3.0);

        let s = state(&[[4.0, 0.0], [f64::NAN, 0.0], [4.0, 0.0]]);
        close(missing_interior_posterior(&s, 0, 0, 1).unwrap(), 4.0, 0.5);
    }

    #[test]
    fn interior_rejects_edge_layers() {
        let s = state(&[[1.0, 0.0], [f64::NAN, 0.0], [3.0, 0.0]]);
        assert!(missing_interior_posterior(&s, 0, 0, 0).is_err());
        assert!(missing_interior_posterior(&s, 0, 0, 2).is_err());
    }

    #[test]
    fn terminal_cases() {
        let mut s = state(&[[2.0, 0.5], [f64::NAN, 0.0]]);
        s.params.mu2 = 0.5;
        close(missing_terminal_posterior(&s, 0, 0).unwrap(), 2.5, 1.0);

        s.model.set_source(0, 0, Some(1));
        s.coeffs.set(0, 0, Some(Coef { a: 1.0, b: 2.0 }));
        close(missing_terminal_posterior(&s, 0, 0).unwrap(), 2.0 + 2.0, 1.0);

        let mut s = state(&[[f64::NAN, 0.0]]);
        s.params.mu[0] = 3.0;
        s.params.sigma1_sq = 0.7;
        close(missing_terminal_posterior(&s, 0, 0).unwrap(), 3.0, 0.7);
    }
}
