//! Coefficient proposals for a regulation that is being switched on, with
//! the latent values integrated out.
//!
//! A ridge fit on the current values seeds a few EM steps on the observed
//! data under the candidate model; the proposal is a Gaussian around the
//! result, widened to allow for the information lost to the latent values.
//! Everything is a deterministic function of the state, so the proposal
//! density can be evaluated in both directions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Coef, PriorConfig};
use crate::samplers::{person_block_moments, ModelState};
use crate::stats::LN_2PI;

const EM_STEPS: usize = 3;
const SPREAD: f64 = 1.5;

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    sx: f64,
    sxx: f64,
    sy: f64,
    sxy: f64,
}

/// Gaussian proposal for `(a, b)` given by its mean and precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefProposal {
    pub mean: Coef,
    /// `(P₁₁, P₁₂, P₂₂)`.
    pub precision: (f64, f64, f64),
}

impl CoefProposal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coef {
        let (p11, p12, p22) = self.precision;
        let l11 = p11.sqrt();
        let l21 = p12 / l11;
        let l22 = (p22 - l21 * l21).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let x2 = z2 / l22;
        let x1 = (z1 - l21 * x2) / l11;
        Coef {
            a: self.mean.a + x1,
            b: self.mean.b + x2,
        }
    }

    pub fn log_density(&self, coef: Coef) -> f64 {
        let (p11, p12, p22) = self.precision;
        let (da, db) = (coef.a - self.mean.a, coef.b - self.mean.b);
        let det = p11 * p22 - p12 * p12;
        -LN_2PI + 0.5 * det.ln() - 0.5 * (p11 * da * da + 2.0 * p12 * da * db + p22 * db * db)
    }
}

struct Ridge {
    sigma2_sq: f64,
    prec_a: f64,
    prec_b: f64,
    alpha: (f64, f64),
}

impl Ridge {
    /// Maximiser and precision of the expected log posterior.
    fn fit(&self, m: &Moments) -> Result<CoefProposal> {
        let s2 = self.sigma2_sq;
        let p11 = m.n / s2 + self.prec_a;
        let p12 = m.sx / s2;
        let p22 = m.sxx / s2 + self.prec_b;
        let h1 = m.sy / s2 + self.prec_a * self.alpha.0;
        let h2 = m.sxy / s2 + self.prec_b * self.alpha.1;
        let det = p11 * p22 - p12 * p12;
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::Numerical("coefficient proposal is degenerate".into()));
        }
        Ok(CoefProposal {
            mean: Coef {
                a: (p22 * h1 - p12 * h2) / det,
                b: (p11 * h2 - p12 * h1) / det,
            },
            precision: (p11, p12, p22),
        })
    }
}

/// Proposal for the coefficients of `source → target` at transition `t`
/// in `state`, whatever the target's current configuration there.
pub fn em_coef_proposal(
    state: &ModelState,
    t: usize,
    target: usize,
    source: usize,
    prior: &PriorConfig,
) -> Result<CoefProposal> {
    let kk = state.data.targets();
    let (n, c) = state.coefficient_totals(prior);
    let (n_other, c_other) = match state.coeffs.get(t, target) {
        Some(own) => (n - 1, (c - prior.coef_deviation(own)).max(0.0)),
        None => (n, c),
    };
    // the conditional prior variance enters through its expected inverse
    let inv_sigma = (prior.v / 2.0 + n_other as f64) / (2.0 * prior.v * prior.lambda + c_other / 2.0);
    let (sa, sb) = prior.coef_scales();
    let ridge = Ridge {
        sigma2_sq: state.params.sigma2_sq,
        prec_a: inv_sigma / sa,
        prec_b: inv_sigma / sb,
        alpha: (prior.alpha_a, prior.alpha_b),
    };
    let (cx, before, after) = (t * kk + source, t * kk + target, (t + 1) * kk + target);
    let persons: Vec<usize> = (0..state.data.persons.len())
        .filter(|&e| state.data.persons[e].death_stage >= t + 2)
        .collect();

    let mut m = Moments::default();
    for &e in &persons {
        let v = &state.data.persons[e].values;
        let (x, y) = (v[cx], v[after] - v[before]);
        m.n += 1.0;
        m.sx += x;
        m.sxx += x * x;
        m.sy += y;
        m.sxy += x * y;
    }
    let mut fit = ridge.fit(&m)?;

    let mut work = state.clone();
    work.model.set_source(t, target, Some(source));
    for _ in 0..EM_STEPS {
        work.coeffs.set(t, target, Some(fit.mean));
        let mut m = Moments::default();
        for &e in &persons {
            let b = person_block_moments(&work, e)?;
            let ex = b.mean(cx);
            let ey = b.mean(after) - b.mean(before);
            let var_x = b.covariance(cx, cx);
            let cov_xy = b.covariance(cx, after) - b.covariance(cx, before);
            m.n += 1.0;
            m.sx += ex;
            m.sxx += ex * ex + var_x;
            m.sy += ey;
            m.sxy += ex * ey + cov_xy;
        }
        fit = ridge.fit(&m)?;
    }
    let widen = 1.0 / (SPREAD * SPREAD);
    let (p11, p12, p22) = fit.precision;
    fit.precision = (p11 * widen, p12 * widen, p22 * widen);
    Ok(fit)
}
