//! Run settings from `key = value` files and command-line overrides.
//!
//! Chain keys (`outer`, `inner`, ...) apply both to inference runs, which
//! start from [`McmcConfig::default`], and to benchmarks, which start from
//! a shorter desk-scale chain. Unless `burn_in` is given it is a quarter of
//! the run.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::baselines::ForestConfig;
use crate::engine::{McmcConfig, MoveScoring};
use crate::error::{Error, Result};
use crate::model::{IndicatorPrior, PriorConfig};

use super::benchmark::{BenchConfig, Method};
use super::subsample::SubsampleConfig;

/// Every recognised key with a one-line description.
pub const SETTING_KEYS: &[(&str, &str)] = &[
    ("seed", "random seed"),
    ("min_support", "smallest support of a reported edge"),
    ("c", "prior mean of the stage-1 means"),
    ("d", "prior variance of the stage-1 means"),
    ("c2", "prior mean of the increment mean"),
    ("d2", "prior variance of the increment mean"),
    ("p1", "inverse-gamma shape of the stage-1 variance"),
    ("q1", "inverse-gamma scale of the stage-1 variance"),
    ("p2", "inverse-gamma shape of the increment variance"),
    ("q2", "inverse-gamma scale of the increment variance"),
    ("alpha_a", "prior location of the intercept"),
    ("alpha_b", "prior location of the slope"),
    ("v_a", "intercept prior scale"),
    ("v_b", "slope prior scale parameter"),
    ("v", "degrees of freedom of the coefficient variance prior"),
    ("lambda", "scale of the coefficient variance prior"),
    ("indicator_prior", "hierarchical or flat"),
    ("outer", "outer iterations"),
    ("inner", "structural moves per transition per outer iteration"),
    ("burn_in", "discarded moves per transition"),
    ("thinning", "keep every n-th retained sample"),
    ("step_a", "initial intercept step size"),
    ("step_b", "initial slope step size"),
    ("adapt", "tune step sizes during burn-in (true/false)"),
    ("warmup", "tempered warm-up moves per transition"),
    ("anneal_from", "inverse temperature at the start of the warm-up"),
    ("scoring", "conditional or integrated"),
    ("explore", "share of uniformly chosen structural proposals"),
    ("ops_no_relationship", "add,delete,swap probabilities for an empty layer"),
    ("ops_all_regulated", "add,delete,swap probabilities for a full layer"),
    ("ops_other", "add,delete,swap probabilities otherwise"),
    ("rf_trees", "trees per random forest"),
    ("rf_max_iters", "random-forest imputation sweeps"),
    ("rf_min_leaf", "smallest random-forest leaf"),
    ("replicates", "benchmark replicates"),
    ("genes", "simulated genes"),
    ("regions", "simulated regions"),
    ("stages", "simulated stages"),
    ("per_stage", "simulated persons per death stage"),
    ("density", "probability that a target is regulated"),
    ("true_mu", "simulated stage-1 mean"),
    ("true_sigma1_sq", "simulated stage-1 variance"),
    ("true_mu2", "simulated increment mean"),
    ("true_sigma2_sq", "simulated increment variance"),
    ("methods", "comma-separated benchmark methods"),
    ("sub_genes", "genes per subsampled run"),
    ("sub_regions", "regions per subsampled run"),
    ("sub_runs", "number of subsampled runs"),
    ("sub_p_threshold", "p-value cutoff for region weights"),
];

/// One `key = value` assignment and where it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub key: String,
    pub value: String,
    pub path: String,
    /// 1-based line, or 0 for a command-line flag.
    pub line: usize,
}

impl Assignment {
    pub fn flag(key: &str, value: &str) -> Self {
        Assignment {
            key: key.to_string(),
            value: value.to_string(),
            path: format!("--{key}"),
            line: 0,
        }
    }

    fn error(&self, message: String) -> Error {
        if self.line == 0 {
            Error::InvalidInput(format!("{}: {message}", self.path))
        } else {
            Error::Parse {
                path: self.path.clone(),
                line: self.line,
                message,
            }
        }
    }
}

/// Splits a settings file into assignments. Blank lines and `#` comments
/// are skipped; unknown keys are rejected.
pub fn parse_settings(text: &str, path: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        if !SETTING_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        out.push(Assignment {
            key: key.to_string(),
            value: value.trim().to_string(),
            path: path.to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub min_support: f64,
    pub prior: PriorConfig,
    /// Chain settings for inference and subsampled runs.
    pub mcmc: McmcConfig,
    pub forest: ForestConfig,
    /// Benchmark and simulation settings, with their own chain.
    pub bench: BenchConfig,
    pub subsample: SubsampleConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let bench = BenchConfig::default();
        Settings {
            seed: bench.seed,
            min_support: bench.min_support,
            prior: bench.prior.clone(),
            mcmc: McmcConfig::default(),
            forest: bench.forest,
            subsample: SubsampleConfig::default(),
            bench,
        }
    }
}

fn number<T: std::str::FromStr>(a: &Assignment) -> Result<T> {
    a.value
        .parse()
        .map_err(|_| a.error(format!("cannot read {:?} as a number", a.value)))
}

fn boolean(a: &Assignment) -> Result<bool> {
    match a.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(a.error(format!("expected true or false, got {:?}", a.value))),
    }
}

fn triple(a: &Assignment) -> Result<[f64; 3]> {
    let parts: Vec<f64> = a
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| a.error(format!("expected three comma-separated numbers, got {:?}", a.value)))?;
    parts
        .try_into()
        .map_err(|_| a.error(format!("expected three comma-separated numbers, got {:?}", a.value)))
}

/// Applies a chain key; `false` if the key is not one.
fn apply_mcmc(cfg: &mut McmcConfig, a: &Assignment) -> Result<bool> {
    match a.key.as_str() {
        "outer" => cfg.outer = number(a)?,
        "inner" => cfg.inner = number(a)?,
        "burn_in" => cfg.burn_in = number(a)?,
        "thinning" => cfg.thinning = number(a)?,
        "step_a" => cfg.step_sizes.0 = number(a)?,
        "step_b" => cfg.step_sizes.1 = number(a)?,
        "adapt" => cfg.adapt = boolean(a)?,
        "warmup" => cfg.warmup = number(a)?,
        "anneal_from" => cfg.anneal_from = number(a)?,
        "explore" => cfg.explore = number(a)?,
        "scoring" => {
            cfg.scoring = match a.value.as_str() {
                "conditional" => MoveScoring::Conditional,
                "integrated" => MoveScoring::Integrated,
                other => return Err(a.error(format!("scoring must be conditional or integrated, got {other:?}"))),
            }
        }
        "ops_no_relationship" => cfg.op_matrix.no_relationship = triple(a)?,
        "ops_all_regulated" => cfg.op_matrix.all_regulated = triple(a)?,
        "ops_other" => cfg.op_matrix.other = triple(a)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_prior(prior: &mut PriorConfig, a: &Assignment) -> Result<bool> {
    let slot = match a.key.as_str() {
        "c" => &mut prior.c,
        "d" => &mut prior.d,
        "c2" => &mut prior.c2,
        "d2" => &mut prior.d2,
        "p1" => &mut prior.p1,
        "q1" => &mut prior.q1,
        "p2" => &mut prior.p2,
        "q2" => &mut prior.q2,
        "alpha_a" => &mut prior.alpha_a,
        "alpha_b" => &mut prior.alpha_b,
        "v_a" => &mut prior.v_a,
        "v_b" => &mut prior.v_b,
        "v" => &mut prior.v,
        "lambda" => &mut prior.lambda,
        "indicator_prior" => {
            prior.indicator_prior = match a.value.as_str() {
                "hierarchical" => IndicatorPrior::Hierarchical,
                "flat" => IndicatorPrior::Flat,
                other => return Err(a.error(format!("indicator_prior must be hierarchical or flat, got {other:?}"))),
            };
            return Ok(true);
        }
        _ => return Ok(false),
    };
    *slot = number(a)?;
    Ok(true)
}

impl Settings {
    /// Defaults with `assignments` applied in order; later ones win.
    pub fn from_assignments(assignments: &[Assignment]) -> Result<Self> {
        let mut s = Settings::default();
        let mut bench_mcmc = s.bench.mcmc.clone();
        let mut explicit = HashSet::new();
        for a in assignments {
            explicit.insert(a.key.as_str());
            if apply_mcmc(&mut s.mcmc, a)? {
                apply_mcmc(&mut bench_mcmc, a)?;
                continue;
            }
            if apply_prior(&mut s.prior, a)? {
                continue;
            }
            let b = &mut s.bench;
            let sub = &mut s.subsample;
            match a.key.as_str() {
                "seed" => s.seed = number(a)?,
                "min_support" => s.min_support = number(a)?,
                "rf_trees" => s.forest.trees = number(a)?,
                "rf_max_iters" => s.forest.max_iters = number(a)?,
                "rf_min_leaf" => s.forest.min_leaf = number(a)?,
                "replicates" => b.replicates = number(a)?,
                "genes" => b.genes = number(a)?,
                "regions" => b.regions = number(a)?,
                "stages" => b.stages = number(a)?,
                "per_stage" => b.per_stage = number(a)?,
                "density" => b.density = number(a)?,
                "true_mu" => b.true_mu = number(a)?,
                "true_sigma1_sq" => b.true_sigma1_sq = number(a)?,
                "true_mu2" => b.true_mu2 = number(a)?,
                "true_sigma2_sq" => b.true_sigma2_sq = number(a)?,
                "methods" => {
                    b.methods = a
                        .value
                        .split(',')
                        .map(|m| m.parse::<Method>().map_err(|e| a.error(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "sub_genes" => sub.genes = number(a)?,
                "sub_regions" => sub.regions = number(a)?,
                "sub_runs" => sub.runs = number(a)?,
                "sub_p_threshold" => sub.p_threshold = number(a)?,
                other => return Err(a.error(format!("unknown key {other:?}"))),
            }
        }
        if !explicit.contains("burn_in") {
            s.mcmc.burn_in = s.mcmc.total_inner() / 4;
            bench_mcmc.burn_in = bench_mcmc.total_inner() / 4;
        }
        s.mcmc.seed = s.seed;
        bench_mcmc.seed = s.seed;
        s.bench.mcmc = bench_mcmc;
        s.bench.seed = s.seed;
        s.bench.prior = s.prior.clone();
        s.bench.forest = s.forest;
        s.bench.min_support = s.min_support;
        s.subsample.min_support = s.min_support;
        s.prior.check()?;
        s.mcmc.check()?;
        s.bench.mcmc.check()?;
        Ok(s)
    }
}
