//! Joint conditional of all unobserved values of one person.
//!
//! Given the model, coefficients and parameters, a person's values form a
//! linear-Gaussian system: every stage-1 value and every increment
//! contributes one Gaussian factor whose residual is affine in the values.
//! The latent values are therefore jointly Gaussian given the observed
//! ones, and can be drawn in one block.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::{normal_logpdf, LN_2PI};

use super::ModelState;

/// `N(Q⁻¹ h, Q⁻¹)` over the unobserved cells of a person, listed in
/// `cells` as indices into `Person::values`.
#[derive(Clone, Debug)]
pub struct BlockPosterior {
    pub cells: Vec<usize>,
    pub precision: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl BlockPosterior {
    pub fn mean(&self) -> Result<DVector<f64>> {
        Ok(self.factor()?.solve(&self.shift))
    }

    fn factor(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.precision.clone())
            .ok_or_else(|| Error::Numerical("latent-value precision is not positive definite".into()))
    }

    /// One joint draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let chol = self.factor()?;
        let mean = chol.solve(&self.shift);
        let z = DVector::from_fn(self.cells.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        // Q = L Lᵀ, so x = mean + L⁻ᵀ z has covariance Q⁻¹
        let lt = chol.l().transpose();
        let dev = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("singular latent-value factor".into()))?;
        Ok(mean + dev)
    }
}

/// Accumulates `−½ (c + wᵀx)² / var` into the quadratic form over latent cells.
struct Builder {
    slot: Vec<Option<usize>>,
    precision: DMatrix<f64>,
    shift: DVector<f64>,
}

impl Builder {
    /// `terms` are `(cell, weight)`; observed cells fold into the constant.
    fn factor(&mut self, values: &[f64], constant: f64, terms: &[(usize, f64)], var: f64) {
        let mut c = constant;
        let mut latent: [(usize, f64); 3] = [(0, 0.0); 3];
        let mut n = 0;
        for &(cell, w) in terms {
            match self.slot[cell] {
                Some(i) => {
                    latent[n] = (i, w);
                    n += 1;
                }
                None => c += w * values[cell],
            }
        }
        for &(i, wi) in &latent[..n] {
            self.shift[i] -= c * wi / var;
            for &(j, wj) in &latent[..n] {
                self.precision[(i, j)] += wi * wj / var;
            }
        }
    }
}

/// Joint conditional of every unobserved value of person `e`. `None` when
/// the person has no unobserved cell.
pub fn person_block_posterior(state: &ModelState, e: usize) -> Result<Option<BlockPosterior>> {
    let kk = state.data.targets();
    let p = state
        .data
        .persons
        .get(e)
        .ok_or_else(|| Error::Precondition(format!("no person at index {e}")))?;
    let mut slot = vec![None; p.values.len()];
    let mut cells = Vec::new();
    for (i, &obs) in p.observed.iter().enumerate() {
        if !obs {
            slot[i] = Some(cells.len());
            cells.push(i);
        }
    }
    if cells.is_empty() {
        return Ok(None);
    }
    for (i, v) in p.values.iter().enumerate() {
        if slot[i].is_none() && !v.is_finite() {
            return Err(Error::Precondition(format!("person {} has an absent observed value", p.id)));
        }
    }
    let n = cells.len();
    let mut b = Builder {
        slot,
        precision: DMatrix::zeros(n, n),
        shift: DVector::zeros(n),
    };
    let params = &state.params;
    for k in 0..kk {
        b.factor(&p.values, -params.mu[k], &[(k, 1.0)], params.sigma1_sq);
    }
    for t in 0..p.death_stage - 1 {
        for k in 0..kk {
            let before = t * kk + k;
            let after = (t + 1) * kk + k;
            match (state.model.source(t, k), state.coeffs.get(t, k)) {
                (Some(s), Some(c)) => b.factor(
                    &p.values,
                    -c.a,
                    &[(after, 1.0), (before, -1.0), (t * kk + s, -c.b)],
                    params.sigma2_sq,
                ),
                _ => b.factor(
                    &p.values,
                    -params.mu2,
                    &[(after, 1.0), (before, -1.0)],
                    params.sigma2_sq,
                ),
            }
        }
    }
    Ok(Some(BlockPosterior {
        cells,
        precision: b.precision,
        shift: b.shift,
    }))
}

/// Posterior means and covariances of one person's values: observed
/// cells are fixed at their values with zero variance.
pub struct BlockMoments {
    slot: Vec<Option<usize>>,
    values: Vec<f64>,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl BlockMoments {
    pub fn mean(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        match (self.slot[a], self.slot[b], &self.chol) {
            (Some(i), Some(j), Some(chol)) => {
                let mut unit = DVector::zeros(chol.l().nrows());
                unit[j] = 1.0;
                chol.solve(&unit)[i]
            }
            _ => 0.0,
        }
    }
}

pub fn person_block_moments(state: &ModelState, e: usize) -> Result<BlockMoments> {
    let p = &state.data.persons[e];
    let mut values = p.values.clone();
    let mut slot = vec![None; values.len()];
    let Some(post) = person_block_posterior(state, e)? else {
        return Ok(BlockMoments {
            slot,
            values,
            chol: None,
        });
    };
    let chol = post.factor()?;
    let mean = chol.solve(&post.shift);
    for (i, (cell, x)) in post.cells.iter().zip(mean.iter()).enumerate() {
        values[*cell] = *x;
        slot[*cell] = Some(i);
    }
    Ok(BlockMoments {
        slot,
        values,
        chol: Some(chol),
    })
}

/// Log density of the observed values of person `e` with the unobserved
/// ones integrated out.
pub fn person_marginal_loglik(state: &ModelState, e: usize) -> Result<f64> {
    match person_block_posterior(state, e)? {
        None => Ok(person_joint_loglik(state, e)),
        Some(post) => Ok(marginal_and_mean(state, e, &post)?.0),
    }
}

fn marginal_and_mean(
    state: &ModelState,
    e: usize,
    post: &BlockPosterior,
) -> Result<(f64, Cholesky<f64, nalgebra::Dyn>, DVector<f64>)> {
    let chol = post.factor()?;
    let mean = chol.solve(&post.shift);
    let mut values = state.data.persons[e].values.clone();
    for (cell, x) in post.cells.iter().zip(mean.iter()) {
        values[*cell] = *x;
    }
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    // log p(obs) = log p(x̂, obs) − log N(x̂; x̂, Q⁻¹)
    let ll = joint_loglik_at(state, e, &values) + 0.5 * post.cells.len() as f64 * LN_2PI
        - 0.5 * log_det;
    Ok((ll, chol, mean))
}

/// Log density of all values of person `e`, latent ones at their current values.
pub fn person_joint_loglik(state: &ModelState, e: usize) -> f64 {
    joint_loglik_at(state, e, &state.data.persons[e].values)
}

fn joint_loglik_at(state: &ModelState, e: usize, values: &[f64]) -> f64 {
    let kk = state.data.targets();
    let death = state.data.persons[e].death_stage;
    let params = &state.params;
    let mut ll = 0.0;
    for k in 0..kk {
        ll += normal_logpdf(values[k], params.mu[k], params.sigma1_sq);
    }
    for t in 0..death - 1 {
        for k in 0..kk {
            let d = values[(t + 1) * kk + k] - values[t * kk + k];
            let expected = match (state.model.source(t, k), state.coeffs.get(t, k)) {
                (Some(s), Some(c)) => c.a + c.b * values[t * kk + s],
                _ => params.mu2,
            };
            ll += normal_logpdf(d, expected, params.sigma2_sq);
        }
    }
    ll
}

/// Redraws every unobserved value of person `e` jointly.
pub fn sample_person_block<R: Rng + ?Sized>(
    state: &mut ModelState,
    e: usize,
    rng: &mut R,
) -> Result<()> {
    let Some(post) = person_block_posterior(state, e)? else {
        return Ok(());
    };
    let draw = post.sample(rng)?;
    let values = &mut state.data.persons[e].values;
    for (cell, x) in post.cells.iter().zip(draw.iter()) {
        values[*cell] = *x;
    }
    Ok(())
}

/// Redraws the unobserved values of person `e` jointly and returns the
/// marginal log density of the observed ones, both under the current
/// model, coefficients and parameters.
pub fn sample_person_block_marginal<R: Rng + ?Sized>(
    state: &mut ModelState,
    e: usize,
    rng: &mut R,
) -> Result<f64> {
    let Some(post) = person_block_posterior(state, e)? else {
        return Ok(person_joint_loglik(state, e));
    };
    let (ll, chol, mean) = marginal_and_mean(state, e, &post)?;
    let z = DVector::from_fn(post.cells.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let dev = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular latent-value factor".into()))?;
    let values = &mut state.data.persons[e].values;
    for ((cell, m), d) in post.cells.iter().zip(mean.iter()).zip(dev.iter()) {
        values[*cell] = m + d;
    }
    Ok(ll)
}
