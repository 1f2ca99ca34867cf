//! Repeated inference on weighted random subsets of genes and regions, for
//! datasets too wide for a single chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{extract_network, run_chain, Edge, McmcConfig};
use crate::error::{Error, Result};
use crate::model::{Dims, ExpressionDataset, Person, PriorConfig, TargetId};
use crate::stats::{pearson, welch_p_value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    /// Genes per run.
    pub genes: usize,
    /// Regions per run.
    pub regions: usize,
    /// Number of runs.
    pub runs: usize,
    /// A region gains weight for every test at or below this p-value.
    pub p_threshold: f64,
    pub min_support: f64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            genes: 15,
            regions: 5,
            runs: 10,
            p_threshold: 0.05,
            min_support: 0.15,
        }
    }
}

/// Observed death-stage value of every (person, region) for one gene, in
/// person-then-region order; `NaN` where unobserved.
fn gene_profile(dataset: &ExpressionDataset, gene: usize) -> Vec<f64> {
    let (k, r) = (dataset.targets(), dataset.dims.regions);
    let mut out = Vec::with_capacity(dataset.persons.len() * r);
    for p in &dataset.persons {
        let layer = p.death_stage - 1;
        for region in 0..r {
            let cell = layer * k + TargetId::new(gene, region).index(r);
            out.push(if p.observed[cell] { p.values[cell] } else { f64::NAN });
        }
    }
    out
}

/// Gene weights: the sum of a gene's correlations with every other gene
/// over the pooled observed values, floored at zero.
pub fn gene_weights(dataset: &ExpressionDataset) -> Vec<f64> {
    let g = dataset.dims.genes;
    let profiles: Vec<Vec<f64>> = (0..g).map(|i| gene_profile(dataset, i)).collect();
    let mut cor = vec![vec![0.0; g]; g];
    for i in 0..g {
        for m in i + 1..g {
            let (xs, ys): (Vec<f64>, Vec<f64>) = profiles[i]
                .iter()
                .zip(&profiles[m])
                .filter(|(a, b)| !a.is_nan() && !b.is_nan())
                .map(|(a, b)| (*a, *b))
                .unzip();
            let r = pearson(&xs, &ys);
            cor[i][m] = r;
            cor[m][i] = r;
        }
    }
    cor.iter().map(|row| row.iter().sum::<f64>().max(0.0)).collect()
}

/// Region weights: for every gene and every stage after the first, a Welch
/// test of the stage's observed values against stage 1; a region's weight
/// is the number of its tests with p-value at most `p_threshold`.
pub fn region_weights(dataset: &ExpressionDataset, p_threshold: f64) -> Vec<f64> {
    let (k, r) = (dataset.targets(), dataset.dims.regions);
    let observed_at = |stage: usize, target: usize| -> Vec<f64> {
        let cell = (stage - 1) * k + target;
        dataset
            .persons
            .iter()
            .filter(|p| p.death_stage == stage && p.observed[cell])
            .map(|p| p.values[cell])
            .collect()
    };
    let mut weights = vec![0.0; r];
    for (region, w) in weights.iter_mut().enumerate() {
        for gene in 0..dataset.dims.genes {
            let target = TargetId::new(gene, region).index(r);
            let base = observed_at(1, target);
            for stage in 2..=dataset.dims.stages {
                if welch_p_value(&observed_at(stage, target), &base) <= p_threshold {
                    *w += 1.0;
                }
            }
        }
    }
    weights
}

/// Draws `n` distinct indices, each with probability proportional to its
/// weight among those not yet drawn; uniform once the remaining weights
/// are all zero.
pub fn sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > weights.len() {
        return Err(Error::InvalidInput(format!(
            "cannot draw {n} items from {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput("sampling weights must be finite and nonnegative".into()));
    }
    let mut left: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = left.iter().map(|&i| weights[i]).sum();
        let pos = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = left.len() - 1;
            for (j, &i) in left.iter().enumerate() {
                if u < weights[i] {
                    pick = j;
                    break;
                }
                u -= weights[i];
            }
            // floating-point leftovers must not land on a zero weight
            while weights[left[pick]] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            rng.random_range(0..left.len())
        };
        out.push(left.remove(pos));
    }
    Ok(out)
}

/// The dataset restricted to `genes` × `regions`, in the given orders.
pub fn restrict(dataset: &ExpressionDataset, genes: &[usize], regions: &[usize]) -> Result<ExpressionDataset> {
    let (k, r) = (dataset.targets(), dataset.dims.regions);
    let kept: Vec<usize> = genes
        .iter()
        .flat_map(|&g| regions.iter().map(move |&x| TargetId::new(g, x).index(r)))
        .collect();
    let persons = dataset
        .persons
        .iter()
        .map(|p| {
            let mut q = Person::new(p.id, p.death_stage, kept.len());
            for layer in 0..p.death_stage {
                for (j, &src) in kept.iter().enumerate() {
                    q.values[layer * kept.len() + j] = p.values[layer * k + src];
                    q.observed[layer * kept.len() + j] = p.observed[layer * k + src];
                }
            }
            q
        })
        .collect();
    let dims = Dims::new(dataset.dims.stages, genes.len(), regions.len(), dataset.dims.per_stage.clone())?;
    Ok(ExpressionDataset { dims, persons })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubRun {
    pub genes: Vec<usize>,
    pub regions: Vec<usize>,
    /// Detected edges in the full dataset's indexing.
    pub edges: Vec<Edge>,
}

/// A regulation detected by at least one run, with each run's support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedEdge {
    pub transition: usize,
    pub target: TargetId,
    pub source: TargetId,
    /// `(run, support)` pairs in run order.
    pub supports: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleReport {
    pub config: SubsampleConfig,
    pub gene_weights: Vec<f64>,
    pub region_weights: Vec<f64>,
    pub runs: Vec<SubRun>,
    pub merged: Vec<MergedEdge>,
}

fn one_run(
    dataset: &ExpressionDataset,
    config: &SubsampleConfig,
    weights: (&[f64], &[f64]),
    prior: &PriorConfig,
    mcmc: &McmcConfig,
    run: usize,
) -> Result<SubRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    rng.set_stream(2 * run as u64);
    let mut genes = sample_without_replacement(weights.0, config.genes, &mut rng)?;
    let mut regions = sample_without_replacement(weights.1, config.regions, &mut rng)?;
    genes.sort_unstable();
    regions.sort_unstable();
    let sub = restrict(dataset, &genes, &regions)?;
    let cfg = McmcConfig {
        stream: 2 * run as u64 + 1,
        ..mcmc.clone()
    };
    let summary = run_chain(&sub, prior, &cfg)?;
    let lift = |t: TargetId| TargetId::new(genes[t.gene], regions[t.region]);
    let edges = extract_network(&summary, config.min_support)
        .edges
        .into_iter()
        .map(|e| Edge {
            target: lift(e.target),
            source: lift(e.source),
            ..e
        })
        .collect();
    Ok(SubRun { genes, regions, edges })
}

/// Runs `config.runs` chains on weighted random subsets and merges their
/// detected edges. Runs execute in parallel on the current rayon pool; the
/// result does not depend on the pool size.
pub fn subsample_runs(
    dataset: &ExpressionDataset,
    config: &SubsampleConfig,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<SubsampleReport> {
    dataset.check()?;
    if config.runs == 0 || config.genes == 0 || config.regions == 0 {
        return Err(Error::InvalidInput("runs, genes and regions per run must be positive".into()));
    }
    if config.genes > dataset.dims.genes || config.regions > dataset.dims.regions {
        return Err(Error::InvalidInput(format!(
            "subsets of {}x{} do not fit a dataset of {} genes and {} regions",
            config.genes, config.regions, dataset.dims.genes, dataset.dims.regions
        )));
    }
    let gw = gene_weights(dataset);
    let rw = region_weights(dataset, config.p_threshold);
    let runs: Vec<SubRun> = (0..config.runs)
        .into_par_iter()
        .map(|m| one_run(dataset, config, (&gw, &rw), prior, mcmc, m))
        .collect::<Result<_>>()?;

    let mut merged: BTreeMap<(usize, TargetId, TargetId), Vec<(usize, f64)>> = BTreeMap::new();
    for (m, run) in runs.iter().enumerate() {
        for e in &run.edges {
            merged
                .entry((e.transition, e.target, e.source))
                .or_default()
                .push((m, e.support));
        }
    }
    Ok(SubsampleReport {
        config: config.clone(),
        gene_weights: gw,
        region_weights: rw,
        runs,
        merged: merged
            .into_iter()
            .map(|((transition, target, source), supports)| MergedEdge {
                transition,
                target,
                source,
                supports,
            })
            .collect(),
    })
}
