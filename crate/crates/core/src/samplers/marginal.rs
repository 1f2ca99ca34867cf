//! Marginal likelihoods of a target's increments under each configuration.
//!
//! For a regulated target the coefficients `(a, b)` are integrated out
//! analytically for a given coefficient-prior variance `σ²`, which leaves a
//! Gaussian with covariance `σ₂² I + σ² X V Xᵀ`. Since `X` has two columns this
//! needs only the 2×2 matrix `XᵀX` and the projections `Xᵀr`. The remaining
//! one-dimensional integral over `σ²` against its collapsed conditional
//! `IG(v/2 + N⁻, 2vλ + C/2)` is done by trapezoid quadrature in `log σ²`,
//! which converges geometrically for this smooth, fast-decaying integrand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coef, ExpressionDataset, GlobalParams, PriorConfig, RegulationCoefficients};
use crate::stats::{ln_gamma, logsumexp, sample_log_weights, softmax, LN_2PI};

use super::ModelState;

/// Position of a configuration in the per-target configuration vector:
/// `0` is "not regulated", then the admissible sources in index order
/// (the target itself skipped).
pub fn config_index(target: usize, source: Option<usize>) -> usize {
    match source {
        None => 0,
        Some(s) if s < target => s + 1,
        Some(s) => s,
    }
}

/// Inverse of [`config_index`].
pub fn config_source(target: usize, index: usize) -> Option<usize> {
    match index {
        0 => None,
        i if i - 1 < target => Some(i - 1),
        i => Some(i),
    }
}

/// Sufficient statistics of one (target, source) pair at a transition:
/// `y` are the target's increments, `x` the source's values at the earlier
/// stage, over the persons that live through the transition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairData {
    pub n: f64,
    pub sx: f64,
    pub sxx: f64,
    pub sy: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl PairData {
    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        let mut d = PairData {
            n: x.len() as f64,
            ..Default::default()
        };
        for (&xi, &yi) in x.iter().zip(y) {
            d.sx += xi;
            d.sxx += xi * xi;
            d.sy += yi;
            d.syy += yi * yi;
            d.sxy += xi * yi;
        }
        d
    }

    /// Gathers the pair directly from the dataset.
    pub fn from_data(data: &ExpressionDataset, target: usize, source: usize, t: usize) -> Self {
        let kk = data.targets();
        let (x, y): (Vec<f64>, Vec<f64>) = data
            .participants(t)
            .map(|p| {
                let v = &p.values;
                (v[t * kk + source], v[(t + 1) * kk + target] - v[t * kk + target])
            })
            .unzip();
        PairData::from_slices(&x, &y)
    }

    /// `Σ (y − a − b·x)²`.
    pub fn residual_ss(&self, a: f64, b: f64) -> f64 {
        let v = self.syy - 2.0 * a * self.sy - 2.0 * b * self.sxy
            + self.n * a * a
            + 2.0 * a * b * self.sx
            + b * b * self.sxx;
        v.max(0.0)
    }

    /// Gaussian log-likelihood with known coefficients.
    pub fn fixed_loglik(&self, coef: Coef, sigma2_sq: f64) -> f64 {
        -0.5 * self.n * (LN_2PI + sigma2_sq.ln()) - self.residual_ss(coef.a, coef.b) / (2.0 * sigma2_sq)
    }

    /// Per-node log-likelihoods `log N(y; Xα, σ₂² I + σ² X V Xᵀ)` on `grid`.
    fn node_logliks(
        &self,
        grid: &SigmaGrid,
        prior: &PriorConfig,
        sigma2_sq: f64,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        out.clear();
        let (aa, ab) = (prior.alpha_a, prior.alpha_b);
        let (sa, sb) = prior.coef_scales();
        let n = self.n;
        let rr = self.residual_ss(aa, ab);
        let r1 = self.sy - n * aa - ab * self.sx;
        let r2 = self.sxy - aa * self.sx - ab * self.sxx;
        let (w11, w22, w12) = (sa * n, sb * self.sxx, (sa * sb).sqrt() * self.sx);
        let (g1, g2) = (sa.sqrt() * r1, sb.sqrt() * r2);
        let base = -0.5 * n * LN_2PI - 0.5 * (n - 2.0) * sigma2_sq.ln();
        for &s in &grid.sigma_sq {
            let m11 = sigma2_sq + s * w11;
            let m22 = sigma2_sq + s * w22;
            let m12 = s * w12;
            let det = m11 * m22 - m12 * m12;
            if !(det > 0.0 && det.is_finite()) {
                return Err(Error::Numerical(format!(
                    "marginal covariance is not positive definite (det {det})"
                )));
            }
            let proj = (g1 * g1 * m22 + g2 * g2 * m11 - 2.0 * g1 * g2 * m12) / det;
            let quad = ((rr - s * proj) / sigma2_sq).max(0.0);
            out.push(base - 0.5 * det.ln() - 0.5 * quad);
        }
        Ok(())
    }

    /// Log marginal likelihood with `(a, b, σ²)` integrated out.
    pub fn collapsed_loglik(
        &self,
        grid: &SigmaGrid,
        prior: &PriorConfig,
        sigma2_sq: f64,
    ) -> Result<f64> {
        if self.n == 0.0 {
            return Ok(0.0);
        }
        let mut lls = Vec::with_capacity(grid.len());
        self.node_logliks(grid, prior, sigma2_sq, &mut lls)?;
        for (ll, lw) in lls.iter_mut().zip(&grid.log_weights) {
            *ll += lw;
        }
        Ok(logsumexp(&lls))
    }

    /// Normalised log weights of the grid nodes under the coefficient
    /// posterior.
    fn node_posterior_weights(
        &self,
        grid: &SigmaGrid,
        prior: &PriorConfig,
        sigma2_sq: f64,
    ) -> Result<Vec<f64>> {
        let mut lls = Vec::with_capacity(grid.len());
        if self.n > 0.0 {
            self.node_logliks(grid, prior, sigma2_sq, &mut lls)?;
            for (ll, lw) in lls.iter_mut().zip(&grid.log_weights) {
                *ll += lw;
            }
        } else {
            lls.extend_from_slice(&grid.log_weights);
        }
        let total = logsumexp(&lls);
        lls.iter_mut().for_each(|l| *l -= total);
        Ok(lls)
    }

    /// Gaussian posterior of `(a, b)` for prior variance `s`.
    fn coef_posterior_at(&self, s: f64, prior: &PriorConfig, sigma2_sq: f64) -> CoefGaussian {
        let (sa, sb) = prior.coef_scales();
        let (pa, pb) = (1.0 / (s * sa), 1.0 / (s * sb));
        let p11 = self.n / sigma2_sq + pa;
        let p12 = self.sx / sigma2_sq;
        let p22 = self.sxx / sigma2_sq + pb;
        let h1 = self.sy / sigma2_sq + pa * prior.alpha_a;
        let h2 = self.sxy / sigma2_sq + pb * prior.alpha_b;
        let det = p11 * p22 - p12 * p12;
        CoefGaussian {
            mean: ((p22 * h1 - p12 * h2) / det, (p11 * h2 - p12 * h1) / det),
            precision: (p11, p12, p22),
        }
    }

    /// Draws `(a, b)` from their posterior given the data, with `σ²`
    /// integrated against the grid.
    pub fn sample_collapsed_coef<R: Rng + ?Sized>(
        &self,
        grid: &SigmaGrid,
        prior: &PriorConfig,
        sigma2_sq: f64,
        rng: &mut R,
    ) -> Result<Coef> {
        let lw = self.node_posterior_weights(grid, prior, sigma2_sq)?;
        let s = grid.sigma_sq[sample_log_weights(rng, &lw)];
        let g = self.coef_posterior_at(s, prior, sigma2_sq);
        let (p11, p12, p22) = g.precision;
        // P = L Lᵀ; θ = mean + L⁻ᵀ z
        let l11 = p11.sqrt();
        let l21 = p12 / l11;
        let l22 = (p22 - l21 * l21).sqrt();
        if !(l22 > 0.0) {
            return Err(Error::Numerical("coefficient posterior is degenerate".into()));
        }
        let z1: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let z2: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let x2 = z2 / l22;
        let x1 = (z1 - l21 * x2) / l11;
        Ok(Coef {
            a: g.mean.0 + x1,
            b: g.mean.1 + x2,
        })
    }

    /// Log density of [`PairData::sample_collapsed_coef`] at `coef`.
    pub fn collapsed_coef_logpdf(
        &self,
        grid: &SigmaGrid,
        prior: &PriorConfig,
        sigma2_sq: f64,
        coef: Coef,
    ) -> Result<f64> {
        let lw = self.node_posterior_weights(grid, prior, sigma2_sq)?;
        let terms: Vec<f64> = lw
            .iter()
            .zip(&grid.sigma_sq)
            .map(|(w, &s)| w + self.coef_posterior_at(s, prior, sigma2_sq).logpdf(coef))
            .collect();
        Ok(logsumexp(&terms))
    }
}

struct CoefGaussian {
    mean: (f64, f64),
    /// `(P₁₁, P₁₂, P₂₂)`.
    precision: (f64, f64, f64),
}

impl CoefGaussian {
    fn logpdf(&self, coef: Coef) -> f64 {
        let (p11, p12, p22) = self.precision;
        let (da, db) = (coef.a - self.mean.0, coef.b - self.mean.1);
        let det = p11 * p22 - p12 * p12;
        -LN_2PI + 0.5 * det.ln() - 0.5 * (p11 * da * da + 2.0 * p12 * da * db + p22 * db * db)
    }
}

/// Quadrature nodes for `σ² ~ IG(shape, scale)` in `u = log σ²`, with
/// normalised log weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaGrid {
    pub shape: f64,
    pub scale: f64,
    pub sigma_sq: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl SigmaGrid {
    pub fn new(shape: f64, scale: f64) -> Self {
        assert!(shape > 0.0 && scale > 0.0, "IG({shape}, {scale})");
        // The log density of u is -shape·u - scale·e^{-u} up to a constant,
        // peaked at u* = log(scale/shape) with curvature -shape. The right
        // tail decays like e^{-shape·u}, the left one doubly exponentially.
        let mode = (scale / shape).ln();
        let lo = mode - (1.5 + (1.0 + 40.0 / shape).ln());
        let hi = mode + 4.0 + 40.0 / shape;
        let h = (0.6 / shape.sqrt()).min(0.25);
        let count = ((hi - lo) / h).ceil() as usize + 1;
        let log_norm = shape * scale.ln() - ln_gamma(shape);
        let mut sigma_sq = Vec::with_capacity(count);
        let mut log_weights = Vec::with_capacity(count);
        for i in 0..count {
            let u = lo + h * i as f64;
            sigma_sq.push(u.exp());
            let end = if i == 0 || i == count - 1 { 0.5f64.ln() } else { 0.0 };
            log_weights.push(log_norm - shape * u - scale * (-u).exp() + h.ln() + end);
        }
        // absorb the tiny quadrature error of the normalising constant
        let total = logsumexp(&log_weights);
        log_weights.iter_mut().for_each(|w| *w -= total);
        SigmaGrid {
            shape,
            scale,
            sigma_sq,
            log_weights,
        }
    }

    /// Grid for the collapsed posterior `IG(v/2 + n_other, 2vλ + c_other/2)`.
    pub fn collapsed(prior: &PriorConfig, n_other: usize, c_other: f64) -> Self {
        SigmaGrid::new(
            prior.v / 2.0 + n_other as f64,
            2.0 * prior.v * prior.lambda + c_other / 2.0,
        )
    }

    pub fn len(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_sq.is_empty()
    }

    /// Quadrature estimate of `E[f(σ²)]`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.sigma_sq
            .iter()
            .zip(&self.log_weights)
            .map(|(s, w)| w.exp() * f(*s))
            .sum()
    }
}

/// Fixed coefficients for every (transition, target, source) triple; used
/// when the likelihood is evaluated without collapsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    targets: usize,
    entries: Vec<Vec<Coef>>,
}

impl CoefficientTable {
    pub fn new(transitions: usize, targets: usize, fill: Coef) -> Self {
        CoefficientTable {
            targets,
            entries: vec![vec![fill; targets * targets]; transitions],
        }
    }

    pub fn get(&self, t: usize, target: usize, source: usize) -> Coef {
        self.entries[t][target * self.targets + source]
    }

    pub fn set(&mut self, t: usize, target: usize, source: usize, coef: Coef) {
        self.entries[t][target * self.targets + source] = coef;
    }

    pub fn transitions(&self) -> usize {
        self.entries.len()
    }

    pub fn targets(&self) -> usize {
        self.targets
    }
}

/// How regulated configurations are scored.
#[derive(Clone, Copy, Debug)]
pub enum Likelihood<'a> {
    /// Coefficients and their prior variance integrated out.
    Collapsed,
    /// Coefficients fixed at the table's values.
    Fixed(&'a CoefficientTable),
}

/// Cached per-transition data: source values at the earlier stage and
/// target increments, for every participant, plus their cross products.
#[derive(Clone, Debug)]
pub struct TransitionStats {
    pub transition: usize,
    pub targets: usize,
    pub n: usize,
    /// `x[s][e]`: value of `s` at the earlier stage for participant `e`.
    pub x: Vec<Vec<f64>>,
    /// `y[k][e]`: increment of `k` over the transition.
    pub y: Vec<Vec<f64>>,
    sx: Vec<f64>,
    sxx: Vec<f64>,
    sy: Vec<f64>,
    syy: Vec<f64>,
    /// `sxy[s * K + k]`.
    sxy: Vec<f64>,
}

impl TransitionStats {
    pub fn new(data: &ExpressionDataset, t: usize) -> Result<Self> {
        let kk = data.targets();
        let mut x = vec![Vec::new(); kk];
        let mut y = vec![Vec::new(); kk];
        for p in data.participants(t) {
            for k in 0..kk {
                let before = p.values[t * kk + k];
                let after = p.values[(t + 1) * kk + k];
                if !(before.is_finite() && after.is_finite()) {
                    return Err(Error::Precondition(format!(
                        "person {} has absent values at transition {}",
                        p.id,
                        t + 1
                    )));
                }
                x[k].push(before);
                y[k].push(after - before);
            }
        }
        let n = x.first().map_or(0, Vec::len);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        let sx = x.iter().map(|v| v.iter().sum()).collect();
        let sxx = x.iter().map(|v| dot(v, v)).collect();
        let sy = y.iter().map(|v| v.iter().sum()).collect();
        let syy = y.iter().map(|v| dot(v, v)).collect();
        let mut sxy = vec![0.0; kk * kk];
        for s in 0..kk {
            for k in 0..kk {
                sxy[s * kk + k] = dot(&x[s], &y[k]);
            }
        }
        Ok(TransitionStats {
            transition: t,
            targets: kk,
            n,
            x,
            y,
            sx,
            sxx,
            sy,
            syy,
            sxy,
        })
    }

    pub fn pair(&self, target: usize, source: usize) -> PairData {
        PairData {
            n: self.n as f64,
            sx: self.sx[source],
            sxx: self.sxx[source],
            sy: self.sy[target],
            syy: self.syy[target],
            sxy: self.sxy[source * self.targets + target],
        }
    }

    /// Gaussian log-likelihood of the target's increments under `N(μ₂, σ₂²)`.
    pub fn null_loglik(&self, target: usize, mu2: f64, sigma2_sq: f64) -> f64 {
        let ss: f64 = self.y[target].iter().map(|d| (d - mu2).powi(2)).sum();
        -0.5 * self.n as f64 * (LN_2PI + sigma2_sq.ln()) - ss / (2.0 * sigma2_sq)
    }
}

/// Normalised posterior over one target's configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigPosterior {
    pub target: usize,
    /// Unnormalised log weights (log prior + log marginal likelihood),
    /// indexed by [`config_index`].
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ConfigPosterior {
    pub fn from_log_weights(target: usize, log_weights: Vec<f64>) -> Self {
        let probs = softmax(&log_weights);
        ConfigPosterior {
            target,
            log_weights,
            probs,
        }
    }

    pub fn prob(&self, source: Option<usize>) -> f64 {
        self.probs[config_index(self.target, source)]
    }

    /// Probability that the target is regulated by anything.
    pub fn prob_regulated(&self) -> f64 {
        (1.0 - self.probs[0]).max(0.0)
    }
}

/// Scores configurations of the targets of one transition against a fixed
/// snapshot of everything else.
pub struct TransitionScorer<'a> {
    pub stats: &'a TransitionStats,
    pub prior: &'a PriorConfig,
    pub likelihood: Likelihood<'a>,
    pub mu2: f64,
    pub sigma2_sq: f64,
    pub genes: usize,
    pub regions: usize,
    /// Regulations and summed coefficient deviations over all transitions.
    pub n_total: usize,
    pub c_total: f64,
}

impl<'a> TransitionScorer<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        stats: &'a TransitionStats,
        prior: &'a PriorConfig,
        likelihood: Likelihood<'a>,
        params: &GlobalParams,
        coeffs: &RegulationCoefficients,
        genes: usize,
        regions: usize,
    ) -> Self {
        let mut n_total = 0;
        let mut c_total = 0.0;
        for t in 0..coeffs.transitions() {
            for k in 0..stats.targets {
                if let Some(c) = coeffs.get(t, k) {
                    n_total += 1;
                    c_total += prior.coef_deviation(c);
                }
            }
        }
        TransitionScorer {
            stats,
            prior,
            likelihood,
            mu2: params.mu2,
            sigma2_sq: params.sigma2_sq,
            genes,
            regions,
            n_total,
            c_total,
        }
    }

    /// Grid for a target whose own current coefficients (if any) are `own`.
    pub fn grid(&self, own: Option<Coef>) -> SigmaGrid {
        let (n, c) = match own {
            Some(coef) => (
                self.n_total - 1,
                (self.c_total - self.prior.coef_deviation(coef)).max(0.0),
            ),
            None => (self.n_total, self.c_total),
        };
        SigmaGrid::collapsed(self.prior, n, c)
    }

    /// Log marginal likelihood of every configuration of `target`.
    pub fn config_logliks(&self, target: usize, own: Option<Coef>) -> Result<Vec<f64>> {
        let kk = self.stats.targets;
        let t = self.stats.transition;
        let mut out = Vec::with_capacity(kk);
        out.push(self.stats.null_loglik(target, self.mu2, self.sigma2_sq));
        match self.likelihood {
            Likelihood::Fixed(table) => {
                for s in (0..kk).filter(|&s| s != target) {
                    let pair = self.stats.pair(target, s);
                    out.push(pair.fixed_loglik(table.get(t, target, s), self.sigma2_sq));
                }
            }
            Likelihood::Collapsed => {
                let grid = self.grid(own);
                for s in (0..kk).filter(|&s| s != target) {
                    let pair = self.stats.pair(target, s);
                    out.push(pair.collapsed_loglik(&grid, self.prior, self.sigma2_sq)?);
                }
            }
        }
        Ok(out)
    }

    pub fn config_posterior(&self, target: usize, own: Option<Coef>) -> Result<ConfigPosterior> {
        let mut lw = self.config_logliks(target, own)?;
        for (i, w) in lw.iter_mut().enumerate() {
            *w += self.prior.indicator_prior.log_prob(
                self.genes,
                self.regions,
                target,
                config_source(target, i),
            );
        }
        Ok(ConfigPosterior::from_log_weights(target, lw))
    }

    /// Coefficients for a regulation `source → target` that is being
    /// switched on: drawn from their conditional posterior (collapsed
    /// mode) or read from the table (fixed mode).
    pub fn draw_coef<R: Rng + ?Sized>(
        &self,
        target: usize,
        source: usize,
        own: Option<Coef>,
        rng: &mut R,
    ) -> Result<Coef> {
        match self.likelihood {
            Likelihood::Fixed(table) => Ok(table.get(self.stats.transition, target, source)),
            Likelihood::Collapsed => self.stats.pair(target, source).sample_collapsed_coef(
                &self.grid(own),
                self.prior,
                self.sigma2_sq,
                rng,
            ),
        }
    }

    /// Log density of [`TransitionScorer::draw_coef`] at `coef`; zero in
    /// fixed mode, where the draw is deterministic.
    pub fn coef_log_density(
        &self,
        target: usize,
        source: usize,
        own: Option<Coef>,
        coef: Coef,
    ) -> Result<f64> {
        match self.likelihood {
            Likelihood::Fixed(_) => Ok(0.0),
            Likelihood::Collapsed => self.stats.pair(target, source).collapsed_coef_logpdf(
                &self.grid(own),
                self.prior,
                self.sigma2_sq,
                coef,
            ),
        }
    }
}

/// `log Π N(increment; μ₂, σ₂²)` over the persons living through transition `t`.
pub fn null_marginal_loglik(state: &ModelState, target: usize, t: usize) -> f64 {
    let kk = state.data.targets();
    let (mu2, s2) = (state.params.mu2, state.params.sigma2_sq);
    state
        .data
        .participants(t)
        .map(|p| {
            let d = p.values[(t + 1) * kk + target] - p.values[t * kk + target];
            -0.5 * (LN_2PI + s2.ln()) - (d - mu2).powi(2) / (2.0 * s2)
        })
        .sum()
}

/// Collapsed log marginal likelihood of `target` regulated by `source` at
/// transition `t`, conditioning on the coefficients of every other
/// regulation in `state`.
pub fn regulated_marginal_loglik(
    state: &ModelState,
    target: usize,
    source: usize,
    t: usize,
    prior: &PriorConfig,
) -> Result<f64> {
    let kk = state.data.targets();
    if source == target || source >= kk || target >= kk {
        return Err(Error::Precondition(format!(
            "source {source} is not admissible for target {target}"
        )));
    }
    let (mut n, mut c) = state.coefficient_totals(prior);
    if let Some(own) = state.coeffs.get(t, target) {
        n -= 1;
        c = (c - prior.coef_deviation(own)).max(0.0);
    }
    let grid = SigmaGrid::collapsed(prior, n, c);
    PairData::from_data(&state.data, target, source, t).collapsed_loglik(
        &grid,
        prior,
        state.params.sigma2_sq,
    )
}

/// Posterior over the configurations of `target` at transition `t`.
pub fn model_config_posterior(
    state: &ModelState,
    target: usize,
    t: usize,
    prior: &PriorConfig,
    likelihood: Likelihood<'_>,
) -> Result<ConfigPosterior> {
    let stats = TransitionStats::new(&state.data, t)?;
    let dims = &state.data.dims;
    let scorer = TransitionScorer::new(
        &stats,
        prior,
        likelihood,
        &state.params,
        &state.coeffs,
        dims.genes,
        dims.regions,
    );
    scorer.config_posterior(target, state.coeffs.get(t, target))
}
