//! Structural moves on one transition's regulatory layer.
//!
//! A move changes the configuration of a single target. In collapsed mode
//! the coefficients of a newly switched-on regulation are drawn from their
//! conditional posterior, so the acceptance ratio of the joint
//! (configuration, coefficients) move reduces to a ratio of collapsed
//! marginal likelihoods times the ratio of selection probabilities.
//!
//! In integrated mode the latent values are integrated out as well: a
//! candidate is scored by the marginal density of the observed values,
//! fresh latent values are drawn under it, and the reverse proposal is
//! evaluated at those.

use rand::Rng;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::model::{Coef, MoveKind, OperationMatrix, PriorConfig, RegulationCoefficients, RegulatoryModel};
use crate::samplers::{
    coef_pair_conditional_logpdf, config_index, config_source, mh_accept, person_marginal_loglik,
    sample_person_block_marginal, ConfigPosterior, Likelihood, ModelState, TransitionScorer,
    TransitionStats,
};
use crate::stats::{logsumexp, sample_log_weights, sample_probs};

use super::coef_proposal::em_coef_proposal;

/// Everything a move needs to score configurations at one transition.
#[derive(Clone, Copy)]
pub struct MoveContext<'a> {
    pub state: &'a ModelState,
    pub stats: &'a TransitionStats,
    pub prior: &'a PriorConfig,
    pub likelihood: Likelihood<'a>,
    /// Probability of choosing the target and source uniformly instead of
    /// by their posterior weights.
    pub explore: f64,
}

impl<'a> MoveContext<'a> {
    pub fn transition(&self) -> usize {
        self.stats.transition
    }

    fn scorer(&self, coeffs: &RegulationCoefficients) -> TransitionScorer<'a> {
        let dims = &self.state.data.dims;
        TransitionScorer::new(
            self.stats,
            self.prior,
            self.likelihood,
            &self.state.params,
            coeffs,
            dims.genes,
            dims.regions,
        )
    }
}

/// A proposed single-target change.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub kind: MoveKind,
    pub transition: usize,
    pub target: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
    /// Coefficients of the new regulation, if one is switched on.
    pub coef: Option<Coef>,
    /// Log probability of choosing this target and source, given the move kind.
    pub log_forward: f64,
    /// Log posterior ratio of the new over the old configuration.
    pub log_posterior_ratio: f64,
}

impl Proposal {
    /// The model and coefficients after the move.
    pub fn apply(&self, model: &mut RegulatoryModel, coeffs: &mut RegulationCoefficients) {
        model.set_source(self.transition, self.target, self.to);
        coeffs.set(self.transition, self.target, self.coef);
    }
}

fn log_sum_except(log_weights: &[f64], skip: &[usize]) -> f64 {
    let kept: Vec<f64> = log_weights
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, w)| *w)
        .collect();
    logsumexp(&kept)
}

/// Log selection weight of a target: the posterior probability that it is
/// regulated (unregulated targets) or that it is not regulated by its
/// current source (regulated targets).
fn selection_log_weight(post: &ConfigPosterior, current: Option<usize>) -> f64 {
    let idx = config_index(post.target, current);
    log_sum_except(&post.log_weights, &[idx]) - logsumexp(&post.log_weights)
}

/// Log probability of picking `source` among the sources, excluding `exclude`.
fn source_log_prob(post: &ConfigPosterior, source: usize, exclude: Option<usize>) -> f64 {
    let mut skip = vec![0];
    if let Some(e) = exclude {
        skip.push(config_index(post.target, Some(e)));
    }
    post.log_weights[config_index(post.target, Some(source))] - log_sum_except(&post.log_weights, &skip)
}

/// Candidate targets (regulated or not) with their posteriors and
/// normalised log selection probabilities.
struct Candidates {
    targets: Vec<usize>,
    posteriors: Vec<ConfigPosterior>,
    log_probs: Vec<f64>,
}

fn candidates(
    scorer: &TransitionScorer<'_>,
    model: &RegulatoryModel,
    coeffs: &RegulationCoefficients,
    t: usize,
    regulated: bool,
) -> Result<Candidates> {
    let mut targets = Vec::new();
    let mut posteriors = Vec::new();
    let mut logw = Vec::new();
    for k in 0..model.targets() {
        let current = model.source(t, k);
        if current.is_some() != regulated {
            continue;
        }
        let post = scorer.config_posterior(k, coeffs.get(t, k))?;
        logw.push(selection_log_weight(&post, current));
        targets.push(k);
        posteriors.push(post);
    }
    let total = logsumexp(&logw);
    let log_probs = if total == f64::NEG_INFINITY || !total.is_finite() {
        vec![-(targets.len() as f64).ln(); targets.len()]
    } else {
        logw.iter().map(|w| w - total).collect()
    };
    Ok(Candidates {
        targets,
        posteriors,
        log_probs,
    })
}

fn pick<R: Rng + ?Sized>(c: &Candidates, rng: &mut R) -> usize {
    sample_log_weights(rng, &c.log_probs)
}

/// Draws a source for `post.target` with probability proportional to its
/// posterior weight, skipping `exclude`.
fn pick_source<R: Rng + ?Sized>(
    post: &ConfigPosterior,
    exclude: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    let k = post.target;
    let sources: Vec<usize> = (1..post.log_weights.len())
        .filter_map(|i| config_source(k, i))
        .filter(|s| Some(*s) != exclude)
        .collect();
    if sources.is_empty() {
        return None;
    }
    let lw: Vec<f64> = sources
        .iter()
        .map(|&s| post.log_weights[config_index(k, Some(s))])
        .collect();
    Some(sources[sample_log_weights(rng, &lw)])
}

/// Log probability of choosing candidate `i` (and, for Add and Swap,
/// source `to` other than `exclude`) under the mixture of the guided and
/// the uniform proposal.
fn selection_log_prob(
    explore: f64,
    c: &Candidates,
    i: usize,
    to: Option<usize>,
    exclude: Option<usize>,
) -> f64 {
    let post = &c.posteriors[i];
    let n_sources = (post.log_weights.len() - 1 - exclude.is_some() as usize) as f64;
    let mut guided = c.log_probs[i];
    let mut uniform = -(c.targets.len() as f64).ln();
    if let Some(s) = to {
        guided += source_log_prob(post, s, exclude);
        uniform -= n_sources.ln();
    }
    let parts: Vec<f64> = [(1.0 - explore, guided), (explore, uniform)]
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, l)| w.ln() + l)
        .collect();
    logsumexp(&parts)
}

fn uniform_source<R: Rng + ?Sized>(target: usize, kk: usize, exclude: Option<usize>, rng: &mut R) -> Option<usize> {
    let sources: Vec<usize> = (0..kk).filter(|&s| s != target && Some(s) != exclude).collect();
    (!sources.is_empty()).then(|| sources[rng.random_range(0..sources.len())])
}

/// With `draw_coef = false` the proposal carries no coefficients; the
/// caller supplies them.
fn propose_kind<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    kind: MoveKind,
    draw_coef: bool,
    rng: &mut R,
) -> Result<Proposal> {
    let t = ctx.transition();
    let model = &ctx.state.model;
    let kk = model.targets();
    if kind == MoveKind::Swap && kk < 3 {
        return Err(Error::Precondition(
            "swap needs at least three (gene, region) pairs".into(),
        ));
    }
    let scorer = ctx.scorer(&ctx.state.coeffs);
    let c = candidates(&scorer, model, &ctx.state.coeffs, t, kind != MoveKind::Add)?;
    if c.targets.is_empty() {
        return Err(Error::Precondition(match kind {
            MoveKind::Add => "every target is already regulated".into(),
            _ => "no regulation to change".into(),
        }));
    }
    let uniform = ctx.explore > 0.0 && rng.random::<f64>() < ctx.explore;
    let i = if uniform {
        rng.random_range(0..c.targets.len())
    } else {
        pick(&c, rng)
    };
    let (k, post) = (c.targets[i], &c.posteriors[i]);
    let from = model.source(t, k);
    let to = match kind {
        MoveKind::Delete => None,
        _ => {
            let s = if uniform {
                uniform_source(k, kk, from, rng)
            } else {
                pick_source(post, from, rng)
            };
            Some(s.ok_or_else(|| Error::Precondition("no admissible source".into()))?)
        }
    };
    let coef = match to {
        Some(s) if draw_coef => Some(scorer.draw_coef(k, s, ctx.state.coeffs.get(t, k), rng)?),
        _ => None,
    };
    Ok(Proposal {
        kind,
        transition: t,
        target: k,
        from,
        to,
        coef,
        log_forward: selection_log_prob(ctx.explore, &c, i, to, from),
        log_posterior_ratio: post.log_weights[config_index(k, to)]
            - post.log_weights[config_index(k, from)],
    })
}

/// Add: picks an unregulated target by its posterior probability of being
/// regulated, then a source by its posterior weight.
pub fn propose_add<R: Rng + ?Sized>(ctx: &MoveContext<'_>, rng: &mut R) -> Result<Proposal> {
    propose_kind(ctx, MoveKind::Add, true, rng)
}

/// Delete: picks a regulated target by the posterior probability that its
/// current regulation is wrong.
pub fn propose_delete<R: Rng + ?Sized>(ctx: &MoveContext<'_>, rng: &mut R) -> Result<Proposal> {
    propose_kind(ctx, MoveKind::Delete, true, rng)
}

/// Swap: picks a regulated target as Delete does, then a different source.
pub fn propose_swap<R: Rng + ?Sized>(ctx: &MoveContext<'_>, rng: &mut R) -> Result<Proposal> {
    propose_kind(ctx, MoveKind::Swap, true, rng)
}

/// Log probability, evaluated in the candidate state, of the move that
/// undoes `proposal` (given its kind).
pub fn reverse_log_prob(
    ctx: &MoveContext<'_>,
    proposal: &Proposal,
    model: &RegulatoryModel,
    coeffs: &RegulationCoefficients,
) -> Result<f64> {
    let t = proposal.transition;
    let scorer = ctx.scorer(coeffs);
    let k = proposal.target;
    let back = reverse_kind(proposal.kind);
    let c = candidates(&scorer, model, coeffs, t, back != MoveKind::Add)?;
    let i = c
        .targets
        .iter()
        .position(|&x| x == k)
        .ok_or_else(|| Error::Precondition("reverse move is not available".into()))?;
    Ok(selection_log_prob(ctx.explore, &c, i, proposal.from, proposal.to))
}

fn reverse_kind(kind: MoveKind) -> MoveKind {
    match kind {
        MoveKind::Add => MoveKind::Delete,
        MoveKind::Delete => MoveKind::Add,
        MoveKind::Swap => MoveKind::Swap,
    }
}

/// A fully evaluated proposal: the candidate and its acceptance probability.
#[derive(Clone, Debug)]
pub struct EvaluatedMove {
    pub proposal: Proposal,
    pub model: RegulatoryModel,
    pub coeffs: RegulationCoefficients,
    /// `log θ`, at most 0.
    pub log_accept: f64,
}

/// How structural moves treat the latent values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveScoring {
    /// Condition on the current latent values.
    #[default]
    Conditional,
    /// Integrate the latent values out and redraw them with the move.
    Integrated,
}

fn draw_proposal<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    ops: &OperationMatrix,
    draw_coef: bool,
    rng: &mut R,
) -> Result<Option<(Proposal, [f64; 3])>> {
    let probs = ops.move_probs(&ctx.state.model, ctx.transition());
    if probs.iter().sum::<f64>() <= 0.0 {
        return Ok(None);
    }
    let kind = MoveKind::ALL[sample_probs(rng, &probs)];
    let proposal = propose_kind(ctx, kind, draw_coef, rng)?;
    Ok(Some((proposal, probs)))
}

fn clamp_log_accept(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        log_ratio.min(0.0)
    }
}

/// Draws a move kind from the operation matrix, proposes, and evaluates
/// the acceptance probability conditionally on the latent values. `None`
/// when no move is possible.
pub fn propose_move<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    ops: &OperationMatrix,
    rng: &mut R,
) -> Result<Option<EvaluatedMove>> {
    let t = ctx.transition();
    let Some((proposal, probs)) = draw_proposal(ctx, ops, true, rng)? else {
        return Ok(None);
    };
    let kind = proposal.kind;
    let mut model = ctx.state.model.clone();
    let mut coeffs = ctx.state.coeffs.clone();
    proposal.apply(&mut model, &mut coeffs);
    let reverse_probs = ops.move_probs(&model, t);
    let log_reverse = reverse_probs[reverse_kind(kind).index()].ln()
        + reverse_log_prob(ctx, &proposal, &model, &coeffs)?;
    let log_forward = probs[kind.index()].ln() + proposal.log_forward;
    let log_ratio = proposal.log_posterior_ratio + log_reverse - log_forward;
    Ok(Some(EvaluatedMove {
        proposal,
        model,
        coeffs,
        log_accept: clamp_log_accept(log_ratio),
    }))
}

/// A move evaluated with the latent values integrated out. `state`
/// carries the candidate model and coefficients and latent values freshly
/// drawn under them.
#[derive(Clone, Debug)]
pub struct IntegratedMove {
    pub proposal: Proposal,
    pub state: ModelState,
    pub log_accept: f64,
}

/// Proposes as [`propose_move`] does, then scores the candidate by the
/// marginal density of the observed values, the coefficient prior and the
/// indicator prior. Latent values of the persons living through the
/// transition are redrawn under the candidate, and the reverse proposal,
/// including the density of the old coefficients, is evaluated at them.
pub fn propose_integrated_move<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    ops: &OperationMatrix,
    rng: &mut R,
) -> Result<Option<IntegratedMove>> {
    let t = ctx.transition();
    let Some((mut proposal, probs)) = draw_proposal(ctx, ops, false, rng)? else {
        return Ok(None);
    };
    let state = ctx.state;
    let k = proposal.target;
    let old_coef = state.coeffs.get(t, k);
    let collapsed = matches!(ctx.likelihood, Likelihood::Collapsed);

    let mut log_forward = probs[proposal.kind.index()].ln() + proposal.log_forward;
    if let Some(s) = proposal.to {
        proposal.coef = Some(if collapsed {
            let q = em_coef_proposal(state, t, k, s, ctx.prior)?;
            let c = q.sample(rng);
            log_forward += q.log_density(c);
            c
        } else {
            ctx.scorer(&state.coeffs).draw_coef(k, s, old_coef, rng)?
        });
    }

    let mut cand = state.clone();
    proposal.apply(&mut cand.model, &mut cand.coeffs);
    let mut log_target = 0.0;
    for e in 0..state.data.persons.len() {
        if state.data.persons[e].death_stage < t + 2 {
            continue;
        }
        log_target += sample_person_block_marginal(&mut cand, e, rng)?;
        log_target -= person_marginal_loglik(state, e)?;
    }
    if collapsed {
        let (n, c) = state.coefficient_totals(ctx.prior);
        let (n_other, c_other) = match old_coef {
            Some(oc) => (n - 1, (c - ctx.prior.coef_deviation(oc)).max(0.0)),
            None => (n, c),
        };
        if let Some(oc) = old_coef {
            log_target -= coef_pair_conditional_logpdf(oc, n_other, c_other, ctx.prior);
        }
        if let Some(nc) = proposal.coef {
            log_target += coef_pair_conditional_logpdf(nc, n_other, c_other, ctx.prior);
        }
    }
    let dims = &state.data.dims;
    let indicator = &ctx.prior.indicator_prior;
    log_target += indicator.log_prob(dims.genes, dims.regions, k, proposal.to)
        - indicator.log_prob(dims.genes, dims.regions, k, proposal.from);

    let stats = TransitionStats::new(&cand.data, t)?;
    let rctx = MoveContext {
        state: &cand,
        stats: &stats,
        prior: ctx.prior,
        likelihood: ctx.likelihood,
        explore: ctx.explore,
    };
    let reverse_probs = ops.move_probs(&cand.model, t);
    let mut log_reverse = reverse_probs[reverse_kind(proposal.kind).index()].ln()
        + reverse_log_prob(&rctx, &proposal, &cand.model, &cand.coeffs)?;
    if let (Some(s), Some(c), true) = (proposal.from, old_coef, collapsed) {
        log_reverse += em_coef_proposal(&cand, t, k, s, ctx.prior)?.log_density(c);
    }
    Ok(Some(IntegratedMove {
        proposal,
        state: cand,
        log_accept: clamp_log_accept(log_target + log_reverse - log_forward),
    }))
}

/// One Metropolis-Hastings step on the model at `ctx`'s transition.
/// Returns the accepted move, if any.
pub fn model_mh_step<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    ops: &OperationMatrix,
    rng: &mut R,
) -> Result<Option<EvaluatedMove>> {
    match propose_move(ctx, ops, rng)? {
        Some(mv) if mh_accept(rng, mv.log_accept) => Ok(Some(mv)),
        _ => Ok(None),
    }
}
