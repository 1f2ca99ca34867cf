//! Full conditionals and collapsed marginal likelihoods.
//!
//! Every function here is a pure function of a [`ModelState`] snapshot;
//! randomness enters only through explicit `rng` arguments.

mod block;
mod coefficients;
mod conjugate;
mod marginal;
mod missing;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ExpressionDataset, GlobalParams, RegulationCoefficients, RegulatoryModel};
use crate::stats::{sample_inv_gamma, sample_normal};

pub use block::{
    person_block_posterior, person_joint_loglik, person_marginal_loglik, sample_person_block,
    person_block_moments, sample_person_block_marginal, BlockMoments, BlockPosterior,
};
pub use coefficients::{
    coef_pair_conditional_logpdf, coeff_conditional_prior, coeff_mh_step, coeff_mh_update,
    collapsed_sigma_posterior,
    mh_accept, rw_step, CoefParam, MhOutcome, ScaledStudentT,
};
pub use conjugate::{mu2_posterior, mu_gr_posterior, sigma1_posterior, sigma2_posterior};
pub use marginal::{
    config_index, config_source, model_config_posterior, null_marginal_loglik,
    regulated_marginal_loglik, CoefficientTable, ConfigPosterior, Likelihood, PairData,
    SigmaGrid, TransitionScorer, TransitionStats,
};
pub use missing::{missing_interior_posterior, missing_stage1_posterior, missing_terminal_posterior};

/// Everything the conditionals are allowed to look at: the data with current
/// imputations, the model, its coefficients and the global parameters.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub data: ExpressionDataset,
    pub model: RegulatoryModel,
    pub coeffs: RegulationCoefficients,
    pub params: GlobalParams,
}

impl ModelState {
    /// Expected increment of target `k` over transition `t` for `person`,
    /// given the current assignment.
    #[inline]
    pub fn expected_increment(&self, person: usize, t: usize, k: usize) -> f64 {
        let kk = self.data.targets();
        match (self.model.source(t, k), self.coeffs.get(t, k)) {
            (Some(s), Some(c)) => c.a + c.b * self.data.persons[person].values[t * kk + s],
            _ => self.params.mu2,
        }
    }

    /// Number of regulations over all transitions and the summed standardised
    /// squared deviation of their coefficients from the prior location.
    pub fn coefficient_totals(&self, prior: &crate::model::PriorConfig) -> (usize, f64) {
        let mut n = 0;
        let mut c = 0.0;
        for t in 0..self.model.transitions() {
            for k in 0..self.model.targets() {
                if let Some(coef) = self.coeffs.get(t, k) {
                    n += 1;
                    c += prior.coef_deviation(coef);
                }
            }
        }
        (n, c)
    }
}

/// Normal full conditional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianPosterior {
    /// From natural parameters: precision and precision-weighted mean.
    pub fn from_precision(precision: f64, weighted_mean: f64) -> Self {
        GaussianPosterior {
            mean: weighted_mean / precision,
            variance: 1.0 / precision,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_normal(rng, self.mean, self.variance)
    }
}

/// Inverse-gamma full conditional, `IG(shape, scale)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPosterior {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaPosterior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_inv_gamma(rng, self.shape, self.scale)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }
}
