//! Replicated simulation benchmark: random networks, simulated datasets,
//! every method scored against the truth, indexes averaged over replicates.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{pearson_network, ForestConfig, PearsonMode};
use crate::engine::{extract_network, run_chain, McmcConfig};
use crate::error::{Error, Result};
use crate::model::{
    Dims, ExpressionDataset, GlobalParams, PriorConfig, RegulationCoefficients, RegulatoryModel,
};
use crate::simulate::{generate_coefficients, generate_network, simulate_dataset};
use crate::stats::{mean, sample_variance};

use super::metrics::{compute_metrics, Indexes, MetricsReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Pearson1,
    Pearson2,
    Pearson3,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pearson1, Method::Pearson2, Method::Pearson3, Method::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Pearson1 => "pearson1",
            Method::Pearson2 => "pearson2",
            Method::Pearson3 => "pearson3",
        }
    }

    pub fn pearson_mode(self) -> Option<PearsonMode> {
        match self {
            Method::Proposed => None,
            Method::Pearson1 => Some(PearsonMode::P1),
            Method::Pearson2 => Some(PearsonMode::P2),
            Method::Pearson3 => Some(PearsonMode::P3),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub replicates: usize,
    pub stages: usize,
    pub genes: usize,
    pub regions: usize,
    /// Persons per death stage.
    pub per_stage: usize,
    pub density: f64,
    /// Parameters the datasets are simulated with; every target shares `mu`.
    pub true_mu: f64,
    pub true_sigma1_sq: f64,
    pub true_mu2: f64,
    pub true_sigma2_sq: f64,
    pub min_support: f64,
    pub methods: Vec<Method>,
    pub forest: ForestConfig,
    pub prior: PriorConfig,
    pub mcmc: McmcConfig,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            replicates: 10,
            stages: 4,
            genes: 5,
            regions: 5,
            per_stage: 20,
            density: 0.3,
            true_mu: 5.0,
            true_sigma1_sq: 1.0,
            true_mu2: 0.0,
            true_sigma2_sq: 1.0,
            min_support: 0.15,
            methods: Method::ALL.to_vec(),
            forest: ForestConfig::default(),
            prior: PriorConfig::default(),
            mcmc: McmcConfig {
                outer: 20,
                inner: 100,
                burn_in: 500,
                ..McmcConfig::default()
            },
            seed: 1,
        }
    }
}

impl BenchConfig {
    pub fn dims(&self) -> Result<Dims> {
        Dims::uniform(self.stages, self.genes, self.regions, self.per_stage)
    }

    pub fn check(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidInput("need at least one replicate".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no method selected".into()));
        }
        self.dims()?;
        self.mcmc.check()?;
        self.prior.check()
    }
}

/// Metrics of every method on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub true_edges: usize,
    pub metrics: Vec<(Method, MetricsReport)>,
}

/// Mean and sample variance of one index over the replicates where it is
/// defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub variance: f64,
    pub replicates: usize,
}

impl Aggregate {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Aggregate {
            mean: mean(values),
            variance: if values.len() > 1 { sample_variance(values) } else { 0.0 },
            replicates: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub index: String,
    pub transitions: Vec<Option<Aggregate>>,
    pub total: Option<Aggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub rows: Vec<IndexRow>,
}

impl MethodReport {
    pub fn row(&self, index: &str) -> Option<&IndexRow> {
        self.rows.iter().find(|r| r.index == index)
    }

    /// Mean of `index` over all transitions pooled.
    pub fn total(&self, index: &str) -> Option<f64> {
        self.row(index)?.total.map(|a| a.mean)
    }

    /// Mean of `index` at 0-based transition `t`.
    pub fn transition(&self, index: &str, t: usize) -> Option<f64> {
        self.row(index)?.transitions.get(t).copied().flatten().map(|a| a.mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub methods: Vec<MethodReport>,
    pub replicates: Vec<ReplicateOutcome>,
}

impl BenchmarkReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn rng_for(seed: u64, replicate: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 * 4 + purpose);
    rng
}

/// The true network, its coefficients and the complete simulated dataset
/// (latent cells included, flagged unobserved) of replicate `replicate`.
pub fn simulate_replicate(
    config: &BenchConfig,
    replicate: usize,
) -> Result<(RegulatoryModel, RegulationCoefficients, ExpressionDataset)> {
    let dims = config.dims()?;
    let mut rng = rng_for(config.seed, replicate, 0);
    let model = generate_network(&mut rng, &dims, config.density)?;
    let coeffs = generate_coefficients(&mut rng, &model, &config.prior);
    let params = GlobalParams::uniform(
        &dims,
        config.true_mu,
        config.true_sigma1_sq,
        config.true_mu2,
        config.true_sigma2_sq,
    );
    let data = simulate_dataset(&model, &coeffs, &params, &dims, &mut rng)?;
    Ok((model, coeffs, data))
}

/// Simulates replicate `replicate` and scores every configured method on it.
pub fn run_replicate(config: &BenchConfig, replicate: usize) -> Result<ReplicateOutcome> {
    let (model, _, data) = simulate_replicate(config, replicate)?;
    let data = data.observed_only();

    let mut metrics = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let estimate: RegulatoryModel = match method.pearson_mode() {
            Some(mode) => {
                let mut rng = rng_for(config.seed, replicate, 2);
                pearson_network(&data, mode, &config.forest, &mut rng)?
            }
            None => {
                let mcmc = McmcConfig {
                    seed: config.seed,
                    stream: replicate as u64 * 4 + 1,
                    ..config.mcmc.clone()
                };
                let summary = run_chain(&data, &config.prior, &mcmc)?;
                extract_network(&summary, config.min_support).model
            }
        };
        metrics.push((method, compute_metrics(&model, &estimate)?));
    }
    Ok(ReplicateOutcome {
        replicate,
        true_edges: model.total_regulations(),
        metrics,
    })
}

/// Runs all replicates, in parallel on the current rayon pool, and
/// aggregates the indexes. The result does not depend on the pool size.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkReport> {
    config.check()?;
    let replicates: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<_>>()?;
    let transitions = config.stages - 1;
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let reports: Vec<&MetricsReport> = replicates.iter().map(|r| &r.metrics[m].1).collect();
            let rows = Indexes::NAMES
                .iter()
                .map(|&name| {
                    let collect = |pick: &dyn Fn(&MetricsReport) -> Option<Indexes>| -> Vec<f64> {
                        reports
                            .iter()
                            .filter_map(|r| pick(r).and_then(|i| i.get(name)))
                            .collect()
                    };
                    IndexRow {
                        index: name.to_string(),
                        transitions: (0..transitions)
                            .map(|t| Aggregate::of(&collect(&|r| r.transitions[t])))
                            .collect(),
                        total: Aggregate::of(&collect(&|r| r.total)),
                    }
                })
                .collect();
            MethodReport { method, rows }
        })
        .collect();
    Ok(BenchmarkReport {
        config: config.clone(),
        methods,
        replicates,
    })
}
