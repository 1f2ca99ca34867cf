//! The Metropolis-within-partially-collapsed-Gibbs chain.
//!
//! One outer iteration visits every transition in turn. At a transition it
//! runs `inner` structural moves, each followed by a random-walk refresh of
//! the coefficients regulated there, then redraws the latent source layer of
//! that transition. After the last transition every latent value and the
//! global parameters are redrawn.

mod coef_proposal;
mod exact;
mod moves;
mod network;
mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ExpressionDataset, GlobalParams, OperationMatrix, PriorConfig,
    RegulationCoefficients, RegulatoryModel,
};
use crate::samplers::{
    coeff_mh_update, config_index, mh_accept, CoefficientTable, Likelihood, ModelState, TransitionStats,
};

pub use coef_proposal::{em_coef_proposal, CoefProposal};
pub use exact::{enumerate_exact_posterior, ExactPosterior};
pub use moves::{
    model_mh_step, propose_add, propose_delete, propose_integrated_move, propose_move,
    propose_swap, reverse_log_prob, EvaluatedMove, IntegratedMove, MoveContext, MoveScoring,
    Proposal,
};
pub use network::{extract_network, Edge, ExtractedNetwork};
pub use sweep::{initial_fill, resample_all_missing, resample_layer, update_params};

/// Which blocks of the state the chain updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateFlags {
    pub model: bool,
    pub coefficients: bool,
    pub missing: bool,
    pub params: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        UpdateFlags {
            model: true,
            coefficients: true,
            missing: true,
            params: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Outer iterations (passes over all transitions).
    pub outer: usize,
    /// Structural moves per transition per outer iteration.
    pub inner: usize,
    /// Leading moves per transition that are discarded, counted over the
    /// whole run (`outer * inner` in total).
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Stream index, so that replicates sharing a seed get independent draws.
    pub stream: u64,
    pub op_matrix: OperationMatrix,
    /// Random-walk step sizes for intercept and slope.
    pub step_sizes: (f64, f64),
    /// Tune the step sizes during burn-in.
    pub adapt: bool,
    /// Leading moves per transition, rounded down to whole outer
    /// iterations, during which the global parameters stay at their
    /// starting values and the likelihood is tempered. Must not exceed
    /// `burn_in`.
    pub warmup: usize,
    /// Inverse temperature at the start of the warm-up; it rises
    /// geometrically to 1 by the warm-up's end.
    pub anneal_from: f64,
    pub scoring: MoveScoring,
    /// Share of structural proposals that pick the target and source
    /// uniformly rather than by posterior weight.
    pub explore: f64,
    pub updates: UpdateFlags,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            outer: 50,
            inner: 200,
            burn_in: 2500,
            thinning: 1,
            seed: 1,
            stream: 0,
            op_matrix: OperationMatrix::default(),
            step_sizes: (0.3, 0.3),
            adapt: true,
            warmup: 0,
            anneal_from: 0.05,
            scoring: MoveScoring::default(),
            explore: 0.5,
            updates: UpdateFlags::default(),
        }
    }
}

impl McmcConfig {
    pub fn total_inner(&self) -> usize {
        self.outer * self.inner
    }

    /// Outer iterations spent warming up.
    pub fn warmup_iterations(&self) -> usize {
        self.warmup / self.inner
    }

    /// Inverse temperature during outer iteration `i`.
    pub fn inverse_temperature(&self, i: usize) -> f64 {
        let w = self.warmup_iterations();
        if i >= w {
            1.0
        } else {
            self.anneal_from.powf(1.0 - i as f64 / w as f64)
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.outer == 0 || self.inner == 0 {
            return Err(Error::InvalidInput("outer and inner iterations must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidInput("thinning must be at least 1".into()));
        }
        if self.burn_in >= self.total_inner() {
            return Err(Error::InvalidInput(format!(
                "burn-in {} leaves no samples out of {}",
                self.burn_in,
                self.total_inner()
            )));
        }
        if self.warmup > self.burn_in {
            return Err(Error::InvalidInput("warm-up must lie within burn-in".into()));
        }
        if !(self.anneal_from > 0.0 && self.anneal_from <= 1.0) {
            return Err(Error::InvalidInput("anneal_from must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.explore) {
            return Err(Error::InvalidInput("explore must lie in [0, 1]".into()));
        }
        if !(self.step_sizes.0 > 0.0 && self.step_sizes.1 > 0.0) {
            return Err(Error::InvalidInput("step sizes must be positive".into()));
        }
        self.op_matrix.check()
    }
}

/// Proposal and acceptance counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Indexed like [`MoveKind::index`].
    pub moves: [Counter; 3],
    pub intercept: Counter,
    pub slope: Counter,
    pub final_step_sizes: (f64, f64),
}

/// Posterior means of the global parameters over retained outer iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMeans {
    pub mu: Vec<f64>,
    pub sigma1_sq: f64,
    pub mu2: f64,
    pub sigma2_sq: f64,
}

/// What a run leaves behind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub genes: usize,
    pub regions: usize,
    /// `frequencies[t][k][config_index]`; each inner vector sums to 1.
    pub frequencies: Vec<Vec<Vec<f64>>>,
    pub samples: usize,
    pub params: ParamMeans,
    pub diagnostics: Diagnostics,
}

impl ChainSummary {
    pub fn targets(&self) -> usize {
        self.genes * self.regions
    }

    pub fn transitions(&self) -> usize {
        self.frequencies.len()
    }

    /// Support of `source` (or of "not regulated") for `target` at `t`.
    pub fn support(&self, t: usize, target: usize, source: Option<usize>) -> f64 {
        self.frequencies[t][target][config_index(target, source)]
    }
}

struct Recorder {
    counts: Vec<Vec<Vec<u64>>>,
    samples: usize,
    param_sums: ParamMeans,
    param_samples: usize,
}

impl Recorder {
    fn new(transitions: usize, targets: usize) -> Self {
        Recorder {
            counts: vec![vec![vec![0; targets]; targets]; transitions],
            samples: 0,
            param_sums: ParamMeans {
                mu: vec![0.0; targets],
                sigma1_sq: 0.0,
                mu2: 0.0,
                sigma2_sq: 0.0,
            },
            param_samples: 0,
        }
    }

    fn record_layer(&mut self, t: usize, model: &RegulatoryModel) {
        for (k, src) in model.layer(t).iter().enumerate() {
            self.counts[t][k][config_index(k, *src)] += 1;
        }
        if t == 0 {
            self.samples += 1;
        }
    }

    fn record_params(&mut self, params: &GlobalParams) {
        let s = &mut self.param_sums;
        s.mu.iter_mut().zip(&params.mu).for_each(|(a, b)| *a += b);
        s.sigma1_sq += params.sigma1_sq;
        s.mu2 += params.mu2;
        s.sigma2_sq += params.sigma2_sq;
        self.param_samples += 1;
    }
}

/// A running chain.
pub struct Chain<'a> {
    pub state: ModelState,
    prior: PriorConfig,
    config: McmcConfig,
    fixed: Option<&'a CoefficientTable>,
    rng: ChaCha8Rng,
    steps: (f64, f64),
    /// Outer iterations completed.
    iteration: usize,
    recorder: Recorder,
    diagnostics: Diagnostics,
    /// Coefficient acceptances since the last step-size adjustment.
    window: [Counter; 2],
    /// Parameters the warm-up holds and tempers.
    start_params: GlobalParams,
}

impl<'a> Chain<'a> {
    /// Starts from the empty network with latent values filled from the
    /// observed stage means and parameters at data-informed values.
    pub fn new(dataset: &ExpressionDataset, prior: &PriorConfig, config: &McmcConfig) -> Result<Self> {
        dataset.check()?;
        prior.check()?;
        if dataset.participants(0).next().is_none() {
            return Err(Error::InvalidInput(
                "no person lives past stage 1, so no transition can be estimated".into(),
            ));
        }
        let mut data = dataset.clone();
        data.persons.sort_by_key(|p| p.id);
        let model = RegulatoryModel::empty(&data.dims);
        let mut state = ModelState {
            coeffs: RegulationCoefficients::empty_for(&model),
            params: GlobalParams::uniform(
                &data.dims,
                prior.c,
                prior.q1 / (prior.p1 - 1.0).max(1.0),
                prior.c2,
                prior.q2 / (prior.p2 - 1.0).max(1.0),
            ),
            data,
            model,
        };
        initial_fill(&mut state, prior.c);
        for k in 0..state.data.targets() {
            let stage1: Vec<f64> = state.data.persons.iter().map(|p| p.values[k]).collect();
            state.params.mu[k] = crate::stats::mean(&stage1);
        }
        Self::from_state(state, prior, config)
    }

    /// Continues from an explicit, fully filled state.
    pub fn from_state(mut state: ModelState, prior: &PriorConfig, config: &McmcConfig) -> Result<Self> {
        config.check()?;
        prior.check()?;
        state.params.check()?;
        if !state.coeffs.matches(&state.model) {
            return Err(Error::InvalidInput(
                "coefficients do not match the regulated entries of the model".into(),
            ));
        }
        if state.data.persons.iter().any(|p| p.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Precondition("state has absent values".into()));
        }
        state.data.persons.sort_by_key(|p| p.id);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(config.stream);
        let transitions = state.data.dims.transitions();
        let targets = state.data.targets();
        let state_params = state.params.clone();
        Ok(Chain {
            state,
            prior: prior.clone(),
            config: config.clone(),
            fixed: None,
            rng,
            steps: config.step_sizes,
            iteration: 0,
            recorder: Recorder::new(transitions, targets),
            diagnostics: Diagnostics::default(),
            window: [Counter::default(); 2],
            start_params: state_params,
        })
    }

    /// Scores regulations with the coefficients in `table` instead of
    /// integrating them out; new regulations take their table values.
    pub fn with_fixed_coefficients(mut self, table: &'a CoefficientTable) -> Self {
        self.fixed = Some(table);
        self
    }

    fn likelihood(&self) -> Likelihood<'a> {
        match self.fixed {
            Some(t) => Likelihood::Fixed(t),
            None => Likelihood::Collapsed,
        }
    }

    pub fn config(&self) -> &McmcConfig {
        &self.config
    }

    pub fn step_sizes(&self) -> (f64, f64) {
        self.steps
    }
    fn in_burn_in(&self, global_step: usize) -> bool {
        global_step < self.config.burn_in
    }

    fn retained(&self, global_step: usize) -> bool {
        global_step >= self.config.burn_in
            && (global_step - self.config.burn_in) % self.config.thinning == 0
    }

    fn refresh_coefficients(&mut self, stats: &TransitionStats, adapting: bool) {
        let t = stats.transition;
        let (n_total, mut c_total) = self.state.coefficient_totals(&self.prior);
        for k in 0..self.state.data.targets() {
            let (Some(s), Some(coef)) = (self.state.model.source(t, k), self.state.coeffs.get(t, k))
            else {
                continue;
            };
            let own = self.prior.coef_deviation(coef);
            let c_other = (c_total - own).max(0.0);
            let (new, flags) = coeff_mh_update(
                &stats.pair(k, s),
                coef,
                n_total,
                c_other,
                &self.prior,
                self.state.params.sigma2_sq,
                self.steps,
                &mut self.rng,
            );
            c_total = c_other + self.prior.coef_deviation(new);
            self.state.coeffs.set(t, k, Some(new));
            self.diagnostics.intercept.record(flags[0]);
            self.diagnostics.slope.record(flags[1]);
            if adapting {
                self.window[0].record(flags[0]);
                self.window[1].record(flags[1]);
            }
        }
        if adapting {
            self.adapt_steps();
        }
    }

    fn adapt_steps(&mut self) {
        const WINDOW: u64 = 50;
        let steps = [&mut self.steps.0, &mut self.steps.1];
        for (w, step) in self.window.iter_mut().zip(steps) {
            if w.proposed >= WINDOW {
                let rate = w.rate();
                if rate < 0.2 {
                    *step *= 0.8;
                } else if rate > 0.5 {
                    *step *= 1.25;
                }
                *w = Counter::default();
            }
        }
    }

    fn transition_sweep(&mut self, t: usize) -> Result<()> {
        let flags = self.config.updates;
        let mut stats = TransitionStats::new(&self.state.data, t)?;
        let base = self.iteration * self.config.inner;
        for l in 0..self.config.inner {
            let global = base + l;
            if flags.model {
                let ctx = MoveContext {
                    state: &self.state,
                    stats: &stats,
                    prior: &self.prior,
                    likelihood: self.likelihood(),
                    explore: self.config.explore,
                };
                let ops = &self.config.op_matrix;
                match self.config.scoring {
                    MoveScoring::Conditional => {
                        if let Some(mv) = moves::propose_move(&ctx, ops, &mut self.rng)? {
                            let accepted = mh_accept(&mut self.rng, mv.log_accept);
                            self.diagnostics.moves[mv.proposal.kind.index()].record(accepted);
                            if accepted {
                                self.state.model = mv.model;
                                self.state.coeffs = mv.coeffs;
                            }
                        }
                    }
                    MoveScoring::Integrated => {
                        if let Some(mv) = moves::propose_integrated_move(&ctx, ops, &mut self.rng)? {
                            let accepted = mh_accept(&mut self.rng, mv.log_accept);
                            self.diagnostics.moves[mv.proposal.kind.index()].record(accepted);
                            if accepted {
                                self.state = mv.state;
                                stats = TransitionStats::new(&self.state.data, t)?;
                            }
                        }
                    }
                }
            }
            if flags.coefficients && self.fixed.is_none() {
                let adapting = self.config.adapt && self.in_burn_in(global);
                self.refresh_coefficients(&stats, adapting);
            }
            if self.retained(global) {
                self.recorder.record_layer(t, &self.state.model);
            }
        }
        if flags.missing {
            sweep::resample_layer(&mut self.state, t, &mut self.rng)?;
        }
        Ok(())
    }

    /// One pass over every transition, then the full latent sweep and the
    /// parameter update.
    pub fn outer_step(&mut self) -> Result<()> {
        let w = self.config.warmup_iterations();
        let warming = self.iteration < w;
        if w > 0 && self.iteration <= w {
            // a tempered Gaussian is a Gaussian with inflated variance
            let beta = self.config.inverse_temperature(self.iteration);
            self.state.params = self.start_params.clone();
            self.state.params.sigma1_sq /= beta;
            self.state.params.sigma2_sq /= beta;
        }
        for t in 0..self.state.data.dims.transitions() {
            self.transition_sweep(t)?;
        }
        let flags = self.config.updates;
        if flags.missing {
            resample_all_missing(&mut self.state, &mut self.rng)?;
        }
        if flags.params && !warming {
            update_params(&mut self.state, &self.prior, &mut self.rng)?;
        }
        let last = (self.iteration + 1) * self.config.inner - 1;
        if last >= self.config.burn_in {
            self.recorder.record_params(&self.state.params);
        }
        self.iteration += 1;
        check_finite(&self.state)
    }

    /// Runs the remaining outer iterations.
    pub fn run(&mut self) -> Result<()> {
        while self.iteration < self.config.outer {
            self.outer_step()?;
        }
        Ok(())
    }

    pub fn summary(&self) -> ChainSummary {
        let r = &self.recorder;
        let frequencies = r
            .counts
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|c| {
                        let total: u64 = c.iter().sum();
                        c.iter()
                            .map(|&x| if total == 0 { 0.0 } else { x as f64 / total as f64 })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let n = r.param_samples.max(1) as f64;
        let p = &r.param_sums;
        let mut diagnostics = self.diagnostics.clone();
        diagnostics.final_step_sizes = self.steps;
        ChainSummary {
            genes: self.state.data.dims.genes,
            regions: self.state.data.dims.regions,
            frequencies,
            samples: r.samples,
            params: ParamMeans {
                mu: p.mu.iter().map(|x| x / n).collect(),
                sigma1_sq: p.sigma1_sq / n,
                mu2: p.mu2 / n,
                sigma2_sq: p.sigma2_sq / n,
            },
            diagnostics,
        }
    }
}

fn check_finite(state: &ModelState) -> Result<()> {
    let p = &state.params;
    let finite = p.mu.iter().all(|x| x.is_finite())
        && p.mu2.is_finite()
        && p.sigma1_sq.is_finite()
        && p.sigma1_sq > 0.0
        && p.sigma2_sq.is_finite()
        && p.sigma2_sq > 0.0
        && state.coeffs.iter().all(|(_, _, c)| c.a.is_finite() && c.b.is_finite())
        && state
            .data
            .persons
            .iter()
            .all(|p| p.values.iter().all(|v| v.is_finite()));
    if finite {
        Ok(())
    } else {
        Err(Error::Numerical("chain state became non-finite".into()))
    }
}

/// Runs a chain from the default starting state and summarises it.
pub fn run_chain(
    dataset: &ExpressionDataset,
    prior: &PriorConfig,
    config: &McmcConfig,
) -> Result<ChainSummary> {
    let mut chain = Chain::new(dataset, prior, config)?;
    chain.run()?;
    Ok(chain.summary())
}
