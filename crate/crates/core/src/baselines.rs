//! Correlation-based comparators.
//!
//! Pearson1 correlates the observed cohorts of adjacent stages directly.
//! Pearson2 and Pearson3 first complete the person × target × stage tensor,
//! by per-cell means and by iterated random-forest regression respectively,
//! and then correlate whole stage columns. In every variant a target counts
//! as regulated when some correlation reaches [`CORRELATION_CUTOFF`] in
//! absolute value, by the source with the largest one.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smartcore::ensemble::random_forest_regressor::{
    RandomForestRegressor, RandomForestRegressorParameters,
};
use smartcore::linalg::basic::matrix::DenseMatrix;

use crate::error::{Error, Result};
use crate::model::{Dims, ExpressionDataset, RegulatoryModel};
use crate::stats::pearson;

pub const CORRELATION_CUTOFF: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PearsonMode {
    /// Observed cohorts only.
    P1,
    /// Mean imputation.
    P2,
    /// Random-forest imputation.
    P3,
}

impl PearsonMode {
    pub const ALL: [PearsonMode; 3] = [PearsonMode::P1, PearsonMode::P2, PearsonMode::P3];

    pub fn name(self) -> &'static str {
        match self {
            PearsonMode::P1 => "pearson1",
            PearsonMode::P2 => "pearson2",
            PearsonMode::P3 => "pearson3",
        }
    }
}

/// Complete values for every person at every stage, including stages after
/// death.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputedTensor {
    pub dims: Dims,
    pub person_ids: Vec<u64>,
    /// `values[person][layer * targets + k]` for all `T` layers.
    pub values: Vec<Vec<f64>>,
    /// Which entries were observed in the source dataset.
    pub observed: Vec<Vec<bool>>,
}

impl ImputedTensor {
    pub fn value(&self, person: usize, layer: usize, k: usize) -> f64 {
        self.values[person][layer * self.dims.targets() + k]
    }

    /// All persons' values of target `k` at `layer`.
    pub fn column(&self, layer: usize, k: usize) -> Vec<f64> {
        let kk = self.dims.targets();
        self.values.iter().map(|v| v[layer * kk + k]).collect()
    }

    fn columns(&self) -> usize {
        self.dims.stages * self.dims.targets()
    }
}

/// Fills every unobserved cell with the mean of the observed values of its
/// (target, stage).
pub fn impute_mean(dataset: &ExpressionDataset) -> Result<ImputedTensor> {
    let kk = dataset.targets();
    let cols = dataset.dims.stages * kk;
    let mut sum = vec![0.0; cols];
    let mut count = vec![0usize; cols];
    for p in &dataset.persons {
        for (j, (&v, &o)) in p.values.iter().zip(&p.observed).enumerate() {
            if o {
                sum[j] += v;
                count[j] += 1;
            }
        }
    }
    if let Some(j) = count.iter().position(|&c| c == 0) {
        let target = dataset.dims.target(j % kk);
        return Err(Error::InvalidInput(format!(
            "no observed values for target {target} at stage {}",
            j / kk + 1
        )));
    }
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut values = Vec::with_capacity(dataset.persons.len());
    let mut observed = Vec::with_capacity(dataset.persons.len());
    for p in &dataset.persons {
        let mut row = means.clone();
        let mut mask = vec![false; cols];
        for (j, (&v, &o)) in p.values.iter().zip(&p.observed).enumerate() {
            if o {
                row[j] = v;
                mask[j] = true;
            }
        }
        values.push(row);
        observed.push(mask);
    }
    Ok(ImputedTensor {
        dims: dataset.dims.clone(),
        person_ids: dataset.persons.iter().map(|p| p.id).collect(),
        values,
        observed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_iters: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_iters: 10,
            min_leaf: 5,
        }
    }
}

/// Iterative random-forest imputation. Starts from [`impute_mean`], then
/// regresses each incomplete column on all others and re-predicts its
/// missing cells, sweeping until the relative change of the imputed values
/// grows or `max_iters` sweeps have run. On growth the previous sweep's
/// values are returned.
pub fn impute_random_forest<R: Rng + ?Sized>(
    dataset: &ExpressionDataset,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<ImputedTensor> {
    if config.trees == 0 {
        return Err(Error::InvalidInput("random forest needs at least one tree".into()));
    }
    let mut current = impute_mean(dataset)?;
    let cols = current.columns();
    let rows = current.values.len();
    let mut order: Vec<usize> = (0..cols)
        .filter(|&j| current.observed.iter().any(|m| !m[j]))
        .collect();
    order.sort_by_key(|&j| current.observed.iter().filter(|m| !m[j]).count());
    if order.is_empty() || cols < 2 {
        return Ok(current);
    }

    let mut last_change = f64::INFINITY;
    for _ in 0..config.max_iters {
        let previous = current.clone();
        for &j in &order {
            let seed: u64 = rng.random();
            let (train, test): (Vec<usize>, Vec<usize>) =
                (0..rows).partition(|&e| current.observed[e][j]);
            if train.len() < 2 || test.is_empty() {
                continue;
            }
            let y: Vec<f64> = train.iter().map(|&e| current.values[e][j]).collect();
            if y.iter().all(|v| *v == y[0]) {
                continue;
            }
            let features = |e: usize| -> Vec<f64> {
                (0..cols).filter(|&c| c != j).map(|c| current.values[e][c]).collect()
            };
            let x_train: Vec<Vec<f64>> = train.iter().map(|&e| features(e)).collect();
            let constant = (0..cols - 1).all(|c| x_train.iter().all(|r| r[c] == x_train[0][c]));
            if constant {
                continue;
            }
            let x_test: Vec<Vec<f64>> = test.iter().map(|&e| features(e)).collect();
            let predicted = fit_predict(&x_train, &y, &x_test, config, seed)?;
            for (&e, v) in test.iter().zip(predicted) {
                current.values[e][j] = v;
            }
        }
        let (mut num, mut den) = (0.0, 0.0);
        for e in 0..rows {
            for &j in &order {
                if !current.observed[e][j] {
                    let d = current.values[e][j] - previous.values[e][j];
                    num += d * d;
                    den += current.values[e][j] * current.values[e][j];
                }
            }
        }
        let change = if den > 0.0 { num / den } else { 0.0 };
        if change > last_change {
            return Ok(previous);
        }
        last_change = change;
    }
    Ok(current)
}

fn fit_predict(
    x_train: &[Vec<f64>],
    y: &[f64],
    x_test: &[Vec<f64>],
    config: &ForestConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let failed = |e: smartcore::error::Failed| Error::Numerical(format!("random forest: {e}"));
    let p = x_train[0].len();
    let params = RandomForestRegressorParameters::default()
        .with_n_trees(config.trees)
        .with_m((p / 3).max(1))
        .with_min_samples_leaf(config.min_leaf)
        .with_seed(seed);
    let x = DenseMatrix::from_2d_vec(&x_train.to_vec()).map_err(failed)?;
    let forest = RandomForestRegressor::fit(&x, &y.to_vec(), params).map_err(failed)?;
    let xt = DenseMatrix::from_2d_vec(&x_test.to_vec()).map_err(failed)?;
    forest.predict(&xt).map_err(failed)
}

/// Applies the cutoff rule to `(candidate, r)` pairs, where a `None`
/// candidate stands for the target's own lagged value: the largest `|r|`
/// wins if it reaches the cutoff, and the lagged self means "not regulated".
/// Ties go to the earlier entry.
fn decide(correlations: &[(Option<usize>, f64)]) -> Option<usize> {
    let mut best: Option<(Option<usize>, f64)> = None;
    for &(c, r) in correlations {
        let r = r.abs();
        if r.is_finite() && best.is_none_or(|(_, b)| r > b) {
            best = Some((c, r));
        }
    }
    match best {
        Some((c, r)) if r >= CORRELATION_CUTOFF => c,
        _ => None,
    }
}

/// Pearson1: pairs the persons observed at stage `t` with those observed at
/// stage `t + 1`, each cohort sorted by id and cut to the shorter length,
/// and correlates every source at the earlier stage (the target's own value
/// included) with the target at the later one.
pub fn pearson1_network(dataset: &ExpressionDataset) -> RegulatoryModel {
    let kk = dataset.targets();
    let mut model = RegulatoryModel::empty(&dataset.dims);
    let cohort = |stage: usize| {
        let mut c: Vec<_> = dataset.persons.iter().filter(|p| p.death_stage == stage).collect();
        c.sort_by_key(|p| p.id);
        c
    };
    for t in 0..dataset.dims.transitions() {
        let before = cohort(t + 1);
        let after = cohort(t + 2);
        let n = before.len().min(after.len());
        let paired = |s: usize, k: usize| -> f64 {
            let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for (p, q) in before[..n].iter().zip(&after[..n]) {
                if p.is_observed(t, s, kk) && q.is_observed(t + 1, k, kk) {
                    xs.push(p.value(t, s, kk));
                    ys.push(q.value(t + 1, k, kk));
                }
            }
            pearson(&xs, &ys)
        };
        for k in 0..kk {
            let mut corrs = vec![(None, paired(k, k))];
            corrs.extend(model.admissible_sources(k).map(|s| (Some(s), paired(s, k))));
            model.set_source(t, k, decide(&corrs));
        }
    }
    model
}

/// Pearson2 and Pearson3 on a completed tensor: for transition `t`, the
/// later stage's column of every other target is correlated with the
/// target's own column over all persons.
pub fn tensor_network(tensor: &ImputedTensor) -> RegulatoryModel {
    let kk = tensor.dims.targets();
    let mut model = RegulatoryModel::empty(&tensor.dims);
    for t in 0..tensor.dims.transitions() {
        let columns: Vec<Vec<f64>> = (0..kk).map(|k| tensor.column(t + 1, k)).collect();
        for k in 0..kk {
            let corrs: Vec<(Option<usize>, f64)> = model
                .admissible_sources(k)
                .map(|s| (Some(s), pearson(&columns[s], &columns[k])))
                .collect();
            model.set_source(t, k, decide(&corrs));
        }
    }
    model
}

/// Runs one comparator end to end. The random-forest settings and `rng`
/// are used by Pearson3 only.
pub fn pearson_network<R: Rng + ?Sized>(
    dataset: &ExpressionDataset,
    mode: PearsonMode,
    forest: &ForestConfig,
    rng: &mut R,
) -> Result<RegulatoryModel> {
    match mode {
        PearsonMode::P1 => Ok(pearson1_network(dataset)),
        PearsonMode::P2 => Ok(tensor_network(&impute_mean(dataset)?)),
        PearsonMode::P3 => Ok(tensor_network(&impute_random_forest(dataset, forest, rng)?)),
    }
}
