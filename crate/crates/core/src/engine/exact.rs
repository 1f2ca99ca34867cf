//! Exact posterior over whole models for tiny instances, with coefficients
//! held fixed and every value known. Used to validate the chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExpressionDataset, GlobalParams, PriorConfig, RegulatoryModel};
use crate::samplers::{config_index, config_source, CoefficientTable};
use crate::stats::{logsumexp, normal_logpdf};

const MAX_MODELS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    pub transitions: usize,
    pub targets: usize,
    /// Probability of every model; model `i` has configuration
    /// `(i / K^j) mod K` at slot `j = t * K + k`.
    pub probs: Vec<f64>,
}

impl ExactPosterior {
    fn slots(&self) -> usize {
        self.transitions * self.targets
    }

    /// Index of `model` in [`ExactPosterior::probs`].
    pub fn model_index(&self, model: &RegulatoryModel) -> usize {
        let kk = self.targets;
        let mut idx = 0;
        let mut base = 1;
        for t in 0..self.transitions {
            for k in 0..kk {
                idx += config_index(k, model.source(t, k)) * base;
                base *= kk;
            }
        }
        idx
    }

    /// Configuration index of every slot for model `i`.
    pub fn configs(&self, mut i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.slots());
        for _ in 0..self.slots() {
            out.push(i % self.targets);
            i /= self.targets;
        }
        out
    }

    /// Marginal posterior over the configurations of `target` at `t`.
    pub fn marginal(&self, t: usize, target: usize) -> Vec<f64> {
        let slot = t * self.targets + target;
        let mut out = vec![0.0; self.targets];
        for (i, p) in self.probs.iter().enumerate() {
            out[self.configs(i)[slot]] += p;
        }
        out
    }
}

/// Enumerates every model of a fully observed dataset and normalises
/// prior times Gaussian likelihood, with regulations using the
/// coefficients of `table`.
pub fn enumerate_exact_posterior(
    dataset: &ExpressionDataset,
    table: &CoefficientTable,
    params: &GlobalParams,
    prior: &PriorConfig,
) -> Result<ExactPosterior> {
    dataset.check()?;
    let dims = &dataset.dims;
    let kk = dims.targets();
    let transitions = dims.transitions();
    let slots = kk * transitions;
    if (kk as f64).powi(slots as i32) > MAX_MODELS {
        return Err(Error::InvalidInput(format!(
            "{kk}^{slots} models exceed the enumeration limit of {MAX_MODELS}"
        )));
    }
    if dataset.persons.iter().any(|p| p.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::Precondition("enumeration needs every value".into()));
    }
    // log prior + log likelihood of each slot's configuration, summed
    // directly over persons
    let mut slot_scores = vec![vec![0.0; kk]; slots];
    for t in 0..transitions {
        for k in 0..kk {
            for (c, score) in slot_scores[t * kk + k].iter_mut().enumerate() {
                let source = config_source(k, c);
                let mut ll = prior
                    .indicator_prior
                    .log_prob(dims.genes, dims.regions, k, source);
                for p in dataset.participants(t) {
                    let d = p.values[(t + 1) * kk + k] - p.values[t * kk + k];
                    let mean = match source {
                        None => params.mu2,
                        Some(s) => {
                            let coef = table.get(t, k, s);
                            coef.a + coef.b * p.values[t * kk + s]
                        }
                    };
                    ll += normal_logpdf(d, mean, params.sigma2_sq);
                }
                *score = ll;
            }
        }
    }
    let n_models = kk.pow(slots as u32);
    let mut post = ExactPosterior {
        transitions,
        targets: kk,
        probs: Vec::with_capacity(n_models),
    };
    let mut logp = Vec::with_capacity(n_models);
    for i in 0..n_models {
        let configs = post.configs(i);
        logp.push(
            configs
                .iter()
                .enumerate()
                .map(|(slot, &c)| slot_scores[slot][c])
                .sum::<f64>(),
        );
    }
    let z = logsumexp(&logp);
    post.probs = logp.iter().map(|l| (l - z).exp()).collect();
    Ok(post)
}
