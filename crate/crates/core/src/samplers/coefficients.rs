//! Coefficient conditionals: the Student-t conditional priors that arise
//! from integrating the shared prior variance, and the random-walk
//! Metropolis-Hastings update built on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coef, PriorConfig, RegulationCoefficients, RegulatoryModel};
use crate::stats::{ln_gamma, sample_normal};

use super::{InverseGammaPosterior, ModelState, PairData};

/// Location-scale Student-t distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledStudentT {
    pub dof: f64,
    pub location: f64,
    pub scale: f64,
}

impl ScaledStudentT {
    pub fn logpdf(&self, x: f64) -> f64 {
        let nu = self.dof;
        let z = (x - self.location) / self.scale;
        ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - self.scale.ln()
            - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefParam {
    Intercept,
    Slope,
}

/// Result of one Metropolis-Hastings step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MhOutcome {
    pub value: f64,
    pub accepted: bool,
}

/// Number of regulations other than `(t, target)` and their summed
/// standardised coefficient deviations.
fn others(
    coeffs: &RegulationCoefficients,
    t: usize,
    target: usize,
    prior: &PriorConfig,
) -> (usize, f64) {
    coeffs
        .iter()
        .filter(|&(tt, k, _)| (tt, k) != (t, target))
        .fold((0, 0.0), |(n, c), (_, _, coef)| (n + 1, c + prior.coef_deviation(coef)))
}

/// Conditional posterior of the coefficient-prior variance given every
/// coefficient except those of `(t, target)`: `IG(v/2 + N⁻, 2vλ + C/2)`.
pub fn collapsed_sigma_posterior(
    coeffs: &RegulationCoefficients,
    t: usize,
    target: usize,
    prior: &PriorConfig,
) -> InverseGammaPosterior {
    let (n, c) = others(coeffs, t, target, prior);
    InverseGammaPosterior {
        shape: prior.v / 2.0 + n as f64,
        scale: 2.0 * prior.v * prior.lambda + c / 2.0,
    }
}

/// Student-t conditional prior of one coefficient given the other
/// coefficient of the same regulation and all other regulations.
/// `n_total` counts every regulation including this one; `c_other` sums
/// the deviations of the others.
fn conditional_t(
    which: CoefParam,
    coef: Coef,
    n_total: usize,
    c_other: f64,
    prior: &PriorConfig,
) -> ScaledStudentT {
    let (sa, sb) = prior.coef_scales();
    let dof = prior.v + 2.0 * n_total as f64 - 1.0;
    let base = 4.0 * prior.v * prior.lambda + c_other;
    match which {
        CoefParam::Intercept => {
            let big_a = (coef.b - prior.alpha_b).powi(2) / sb + base;
            ScaledStudentT {
                dof,
                location: prior.alpha_a,
                scale: (big_a * sa / dof).sqrt(),
            }
        }
        CoefParam::Slope => {
            let big_b = (coef.a - prior.alpha_a).powi(2) / sa + base;
            ScaledStudentT {
                dof,
                location: prior.alpha_b,
                scale: (big_b * sb / dof).sqrt(),
            }
        }
    }
}

/// Conditional prior of the intercept or slope of the regulation at
/// `(t, target)`.
pub fn coeff_conditional_prior(
    which: CoefParam,
    target: usize,
    t: usize,
    coeffs: &RegulationCoefficients,
    model: &RegulatoryModel,
    prior: &PriorConfig,
) -> Result<ScaledStudentT> {
    let coef = match (model.source(t, target), coeffs.get(t, target)) {
        (Some(_), Some(c)) => c,
        _ => {
            return Err(Error::Precondition(format!(
                "target {target} is not regulated at transition {}",
                t + 1
            )))
        }
    };
    let (n, c) = others(coeffs, t, target, prior);
    Ok(conditional_t(which, coef, n + 1, c, prior))
}

/// Joint conditional prior density of one regulation's `(a, b)` given
/// `n_other` other regulations whose deviations sum to `c_other`: a
/// bivariate Student-t obtained by integrating the shared variance.
pub fn coef_pair_conditional_logpdf(
    coef: Coef,
    n_other: usize,
    c_other: f64,
    prior: &PriorConfig,
) -> f64 {
    let (sa, sb) = prior.coef_scales();
    let shape = prior.v / 2.0 + n_other as f64;
    let scale = 2.0 * prior.v * prior.lambda + c_other / 2.0;
    let dev = prior.coef_deviation(coef);
    shape.ln() + shape * scale.ln()
        - (shape + 1.0) * (scale + dev / 2.0).ln()
        - (2.0 * std::f64::consts::PI).ln()
        - 0.5 * (sa * sb).ln()
}

/// Metropolis acceptance test in the log domain.
pub fn mh_accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One symmetric Gaussian random-walk step targeting `log_target`.
pub fn rw_step<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    step: f64,
    log_target: impl Fn(f64) -> f64,
) -> MhOutcome {
    let proposal = current + step * sample_normal(rng, 0.0, 1.0);
    let ratio = log_target(proposal) - log_target(current);
    if mh_accept(rng, ratio) {
        MhOutcome {
            value: proposal,
            accepted: true,
        }
    } else {
        MhOutcome {
            value: current,
            accepted: false,
        }
    }
}

/// Updates intercept, then slope, of one regulation whose increments are
/// summarised by `pair`. Returns the new coefficients and the two
/// acceptance flags.
#[allow(clippy::too_many_arguments)]
pub fn coeff_mh_update<R: Rng + ?Sized>(
    pair: &PairData,
    coef: Coef,
    n_total: usize,
    c_other: f64,
    prior: &PriorConfig,
    sigma2_sq: f64,
    steps: (f64, f64),
    rng: &mut R,
) -> (Coef, [bool; 2]) {
    let mut c = coef;
    let t_a = conditional_t(CoefParam::Intercept, c, n_total, c_other, prior);
    let step_a = rw_step(rng, c.a, steps.0, |a| {
        t_a.logpdf(a) - pair.residual_ss(a, c.b) / (2.0 * sigma2_sq)
    });
    c.a = step_a.value;
    let t_b = conditional_t(CoefParam::Slope, c, n_total, c_other, prior);
    let step_b = rw_step(rng, c.b, steps.1, |b| {
        t_b.logpdf(b) - pair.residual_ss(c.a, b) / (2.0 * sigma2_sq)
    });
    c.b = step_b.value;
    (c, [step_a.accepted, step_b.accepted])
}

/// Updates the coefficients of the regulation at `(t, target)` in place.
pub fn coeff_mh_step<R: Rng + ?Sized>(
    state: &mut ModelState,
    target: usize,
    t: usize,
    prior: &PriorConfig,
    steps: (f64, f64),
    rng: &mut R,
) -> Result<[bool; 2]> {
    let (source, coef) = match (state.model.source(t, target), state.coeffs.get(t, target)) {
        (Some(s), Some(c)) => (s, c),
        _ => {
            return Err(Error::Precondition(format!(
                "target {target} is not regulated at transition {}",
                t + 1
            )))
        }
    };
    let pair = PairData::from_data(&state.data, target, source, t);
    let (n, c_other) = others(&state.coeffs, t, target, prior);
    let (new, flags) = coeff_mh_update(
        &pair,
        coef,
        n + 1,
        c_other,
        prior,
        state.params.sigma2_sq,
        steps,
        rng,
    );
    state.coeffs.set(t, target, Some(new));
    Ok(flags)
}
