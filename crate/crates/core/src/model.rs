//! Domain types for stage-structured expression data and the
//! per-transition regulatory model.
//!
//! Indices are 0-based internally. Genes, regions and stages are shown
//! 1-based wherever they reach a user (file formats, `Display`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Number of stages `T` (at least 2).
    pub stages: usize,
    pub genes: usize,
    pub regions: usize,
    /// Persons observed (i.e. who died) at each stage, length `stages`.
    pub per_stage: Vec<usize>,
}

impl Dims {
    pub fn new(stages: usize, genes: usize, regions: usize, per_stage: Vec<usize>) -> Result<Self> {
        let dims = Dims {
            stages,
            genes,
            regions,
            per_stage,
        };
        dims.check()?;
        Ok(dims)
    }

    /// Same number of persons at every stage.
    pub fn uniform(stages: usize, genes: usize, regions: usize, persons: usize) -> Result<Self> {
        Self::new(stages, genes, regions, vec![persons; stages])
    }

    pub fn check(&self) -> Result<()> {
        if self.stages < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 stages, got {}",
                self.stages
            )));
        }
        if self.genes == 0 || self.regions == 0 {
            return Err(Error::InvalidInput("gene and region counts must be positive".into()));
        }
        if self.per_stage.len() != self.stages {
            return Err(Error::InvalidInput(format!(
                "per-stage person counts have length {}, expected {}",
                self.per_stage.len(),
                self.stages
            )));
        }
        if self.per_stage.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidInput("dataset has no persons".into()));
        }
        Ok(())
    }

    /// Number of (gene, region) targets.
    pub fn targets(&self) -> usize {
        self.genes * self.regions
    }

    /// Number of stage transitions, `T - 1`.
    pub fn transitions(&self) -> usize {
        self.stages - 1
    }

    pub fn total_persons(&self) -> usize {
        self.per_stage.iter().sum()
    }

    pub fn target(&self, index: usize) -> TargetId {
        TargetId::from_index(index, self.regions)
    }

    pub fn index(&self, target: TargetId) -> usize {
        target.index(self.regions)
    }
}

/// A (gene, region) pair, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TargetId {
    pub gene: usize,
    pub region: usize,
}

impl TargetId {
    pub fn new(gene: usize, region: usize) -> Self {
        TargetId { gene, region }
    }

    pub fn from_index(index: usize, regions: usize) -> Self {
        TargetId {
            gene: index / regions,
            region: index % regions,
        }
    }

    /// Row-major index `gene * regions + region`.
    pub fn index(self, regions: usize) -> usize {
        self.gene * regions + self.region
    }
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.gene + 1, self.region + 1)
    }
}

/// Configuration of one target at one transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegulatorAssignment {
    NotRegulated,
    RegulatedBy(TargetId),
}

/// Kind of structural move proposed on a transition's model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Add,
    Delete,
    Swap,
}

impl MoveKind {
    pub const ALL: [MoveKind; 3] = [MoveKind::Add, MoveKind::Delete, MoveKind::Swap];

    pub fn index(self) -> usize {
        match self {
            MoveKind::Add => 0,
            MoveKind::Delete => 1,
            MoveKind::Swap => 2,
        }
    }
}

/// Classification of a transition's model used to pick a row of the
/// [`OperationMatrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelClass {
    NoRelationship,
    AllRegulated,
    OtherCase,
}

/// Per-transition assignment of every target to "not regulated" or to a
/// single source. Exactly one configuration per (target, transition) holds
/// by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegulatoryModel {
    genes: usize,
    regions: usize,
    // [transition][target] -> source index
    sources: Vec<Vec<Option<usize>>>,
}

impl RegulatoryModel {
    /// The empty network: every target unregulated at every transition.
    pub fn empty(dims: &Dims) -> Self {
        RegulatoryModel {
            genes: dims.genes,
            regions: dims.regions,
            sources: vec![vec![None; dims.targets()]; dims.transitions()],
        }
    }

    pub fn genes(&self) -> usize {
        self.genes
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn targets(&self) -> usize {
        self.genes * self.regions
    }

    pub fn transitions(&self) -> usize {
        self.sources.len()
    }

    pub fn get(&self, transition: usize, target: usize) -> RegulatorAssignment {
        match self.sources[transition][target] {
            None => RegulatorAssignment::NotRegulated,
            Some(s) => RegulatorAssignment::RegulatedBy(TargetId::from_index(s, self.regions)),
        }
    }

    /// Source index of `target` at `transition`, if regulated.
    #[inline]
    pub fn source(&self, transition: usize, target: usize) -> Option<usize> {
        self.sources[transition][target]
    }

    pub fn set(&mut self, transition: usize, target: usize, assignment: RegulatorAssignment) {
        self.sources[transition][target] = match assignment {
            RegulatorAssignment::NotRegulated => None,
            RegulatorAssignment::RegulatedBy(t) => Some(t.index(self.regions)),
        };
    }

    #[inline]
    pub fn set_source(&mut self, transition: usize, target: usize, source: Option<usize>) {
        self.sources[transition][target] = source;
    }

    /// Sources of every target at one transition.
    pub fn layer(&self, transition: usize) -> &[Option<usize>] {
        &self.sources[transition]
    }

    pub fn regulated_count(&self, transition: usize) -> usize {
        self.sources[transition].iter().filter(|s| s.is_some()).count()
    }

    pub fn total_regulations(&self) -> usize {
        (0..self.transitions()).map(|t| self.regulated_count(t)).sum()
    }

    /// `(target, source)` index pairs at one transition, ascending by target.
    pub fn edges(&self, transition: usize) -> Vec<(usize, usize)> {
        self.sources[transition]
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.map(|s| (k, s)))
            .collect()
    }

    pub fn classify(&self, transition: usize) -> ModelClass {
        let n = self.regulated_count(transition);
        if n == 0 {
            ModelClass::NoRelationship
        } else if n == self.targets() {
            ModelClass::AllRegulated
        } else {
            ModelClass::OtherCase
        }
    }

    /// Sources that may regulate `target`: every other (gene, region) pair.
    pub fn admissible_sources(&self, target: usize) -> impl Iterator<Item = usize> {
        (0..self.targets()).filter(move |&s| s != target)
    }
}

/// A structural constraint broken by a [`RegulatoryModel`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub transition: usize,
    pub target: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    SelfRegulation,
    SourceOutOfRange,
    ShapeMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::SelfRegulation => "self-regulation",
            ViolationKind::SourceOutOfRange => "source out of range",
            ViolationKind::ShapeMismatch => "shape mismatch",
        };
        write!(
            f,
            "{} at transition {}->{} target {}",
            what,
            self.transition + 1,
            self.transition + 2,
            self.target
        )
    }
}

/// Checks the indicator constraints: a target never regulates itself and
/// every source lies inside the (gene, region) grid. Same gene in a
/// different region is allowed.
pub fn validate_model(model: &RegulatoryModel, dims: &Dims) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.genes != dims.genes
        || model.regions != dims.regions
        || model.transitions() != dims.transitions()
    {
        out.push(Violation {
            transition: 0,
            target: 0,
            kind: ViolationKind::ShapeMismatch,
        });
        return out;
    }
    let k_max = dims.targets();
    for (t, layer) in model.sources.iter().enumerate() {
        if layer.len() != k_max {
            out.push(Violation {
                transition: t,
                target: 0,
                kind: ViolationKind::ShapeMismatch,
            });
            continue;
        }
        for (k, src) in layer.iter().enumerate() {
            match *src {
                Some(s) if s == k => out.push(Violation {
                    transition: t,
                    target: k,
                    kind: ViolationKind::SelfRegulation,
                }),
                Some(s) if s >= k_max => out.push(Violation {
                    transition: t,
                    target: k,
                    kind: ViolationKind::SourceOutOfRange,
                }),
                _ => {}
            }
        }
    }
    out
}

/// Intercept and slope of one regulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub a: f64,
    pub b: f64,
}

/// Coefficients for every active regulation, indexed like the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegulationCoefficients {
    entries: Vec<Vec<Option<Coef>>>,
}

impl RegulationCoefficients {
    pub fn empty_for(model: &RegulatoryModel) -> Self {
        RegulationCoefficients {
            entries: vec![vec![None; model.targets()]; model.transitions()],
        }
    }

    #[inline]
    pub fn get(&self, transition: usize, target: usize) -> Option<Coef> {
        self.entries[transition][target]
    }

    #[inline]
    pub fn set(&mut self, transition: usize, target: usize, coef: Option<Coef>) {
        self.entries[transition][target] = coef;
    }

    pub fn transitions(&self) -> usize {
        self.entries.len()
    }

    /// Every `(transition, target, coefficients)` triple.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Coef)> + '_ {
        self.entries.iter().enumerate().flat_map(|(t, layer)| {
            layer
                .iter()
                .enumerate()
                .filter_map(move |(k, c)| c.map(|c| (t, k, c)))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.iter().flatten().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when coefficients exist exactly for the regulated entries of `model`.
    pub fn matches(&self, model: &RegulatoryModel) -> bool {
        self.entries.len() == model.transitions()
            && self.entries.iter().enumerate().all(|(t, layer)| {
                layer.len() == model.targets()
                    && layer
                        .iter()
                        .enumerate()
                        .all(|(k, c)| c.is_some() == model.source(t, k).is_some())
            })
    }
}

/// Stage-1 means, stage-1 variance, increment mean and increment variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// `mu[k]` for target `k` in row-major (gene, region) order.
    pub mu: Vec<f64>,
    pub sigma1_sq: f64,
    pub mu2: f64,
    pub sigma2_sq: f64,
}

impl GlobalParams {
    pub fn uniform(dims: &Dims, mu: f64, sigma1_sq: f64, mu2: f64, sigma2_sq: f64) -> Self {
        GlobalParams {
            mu: vec![mu; dims.targets()],
            sigma1_sq,
            mu2,
            sigma2_sq,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma1_sq > 0.0 && self.sigma2_sq > 0.0) {
            return Err(Error::InvalidInput("variances must be strictly positive".into()));
        }
        Ok(())
    }
}

/// One person: values at stages `1..=death_stage`, layer-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Person {
    pub id: u64,
    /// 1-based stage at which the person was observed.
    pub death_stage: usize,
    /// `values[layer * targets + k]`; `NaN` where nothing is known.
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl Person {
    pub fn new(id: u64, death_stage: usize, targets: usize) -> Self {
        Person {
            id,
            death_stage,
            values: vec![f64::NAN; death_stage * targets],
            observed: vec![false; death_stage * targets],
        }
    }

    pub fn layers(&self) -> usize {
        self.death_stage
    }

    #[inline]
    pub fn value(&self, layer: usize, k: usize, targets: usize) -> f64 {
        self.values[layer * targets + k]
    }

    #[inline]
    pub fn is_observed(&self, layer: usize, k: usize, targets: usize) -> bool {
        self.observed[layer * targets + k]
    }

    pub fn layer(&self, layer: usize, targets: usize) -> &[f64] {
        &self.values[layer * targets..(layer + 1) * targets]
    }
}

/// Per-person expression tensor with an observation mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionDataset {
    pub dims: Dims,
    pub persons: Vec<Person>,
}

impl ExpressionDataset {
    pub fn targets(&self) -> usize {
        self.dims.targets()
    }

    /// Checks shapes, stage bounds and that observed cells carry finite values.
    pub fn check(&self) -> Result<()> {
        self.dims.check()?;
        let k = self.targets();
        let mut counts = vec![0usize; self.dims.stages];
        for p in &self.persons {
            if p.death_stage == 0 || p.death_stage > self.dims.stages {
                return Err(Error::InvalidInput(format!(
                    "person {} has death stage {} outside 1..={}",
                    p.id, p.death_stage, self.dims.stages
                )));
            }
            counts[p.death_stage - 1] += 1;
            if p.values.len() != p.death_stage * k || p.observed.len() != p.values.len() {
                return Err(Error::InvalidInput(format!("person {} has malformed layers", p.id)));
            }
            if p
                .values
                .iter()
                .zip(&p.observed)
                .any(|(v, &o)| o && !v.is_finite())
            {
                return Err(Error::InvalidInput(format!(
                    "person {} has a non-finite observed value",
                    p.id
                )));
            }
        }
        if counts != self.dims.per_stage {
            return Err(Error::InvalidInput(format!(
                "per-stage counts {:?} disagree with persons {:?}",
                self.dims.per_stage, counts
            )));
        }
        Ok(())
    }

    /// Persons that contribute an increment to transition `t` (0-based),
    /// i.e. whose death stage is at least `t + 2`.
    pub fn participants(&self, transition: usize) -> impl Iterator<Item = &Person> {
        self.persons
            .iter()
            .filter(move |p| p.death_stage >= transition + 2)
    }

    /// Copy with every unobserved cell blanked, as an inference method
    /// would receive it.
    pub fn observed_only(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.persons {
            for (v, &o) in p.values.iter_mut().zip(&p.observed) {
                if !o {
                    *v = f64::NAN;
                }
            }
        }
        out
    }

    pub fn unobserved_count(&self) -> usize {
        self.persons
            .iter()
            .map(|p| p.observed.iter().filter(|o| !**o).count())
            .sum()
    }
}

/// How prior mass is spread over the `1 + (G·R - 1)` configurations of a target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorPrior {
    /// Uniform over "not regulated" and the eligible genes, then uniform over
    /// the admissible regions of the chosen gene.
    Hierarchical,
    /// Uniform over all configurations.
    Flat,
}

impl IndicatorPrior {
    /// Log prior probability of `source` (or of "not regulated") for `target`.
    pub fn log_prob(self, genes: usize, regions: usize, target: usize, source: Option<usize>) -> f64 {
        let k = genes * regions;
        match self {
            IndicatorPrior::Flat => -(k as f64).ln(),
            IndicatorPrior::Hierarchical => {
                let eligible_genes = if regions > 1 { genes } else { genes - 1 };
                let top = -((eligible_genes + 1) as f64).ln();
                match source {
                    None => top,
                    Some(s) => {
                        let same_gene = s / regions == target / regions;
                        let n_regions = if same_gene { regions - 1 } else { regions };
                        top - (n_regions as f64).ln()
                    }
                }
            }
        }
    }
}

/// Hyperparameters of the prior distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Prior mean of every stage-1 mean.
    pub c: f64,
    /// Prior variance of every stage-1 mean.
    pub d: f64,
    pub c2: f64,
    pub d2: f64,
    /// Inverse-gamma shape and scale for the stage-1 variance.
    pub p1: f64,
    pub q1: f64,
    /// Inverse-gamma shape and scale for the increment variance.
    pub p2: f64,
    pub q2: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    /// Intercept prior scale `V^a`.
    pub v_a: f64,
    /// Slope prior scale parameter `V^b`; the slope variance factor is `v² / V^b`.
    pub v_b: f64,
    pub v: f64,
    pub lambda: f64,
    pub indicator_prior: IndicatorPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            c: 5.0,
            d: 0.5,
            c2: 0.0,
            d2: 0.5,
            p1: 3.0,
            q1: 2.0,
            p2: 3.0,
            q2: 2.0,
            alpha_a: 1.0,
            alpha_b: 1.0,
            v_a: 1.0,
            v_b: 1.0,
            v: 2.0,
            lambda: 0.05,
            indicator_prior: IndicatorPrior::Hierarchical,
        }
    }
}

impl PriorConfig {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("d2", self.d2),
            ("p1", self.p1),
            ("q1", self.q1),
            ("p2", self.p2),
            ("q2", self.q2),
            ("v_a", self.v_a),
            ("v_b", self.v_b),
            ("v", self.v),
            ("lambda", self.lambda),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Diagonal of the coefficient prior covariance (per unit `σ²`):
    /// `(V^a, v² / V^b)`.
    pub fn coef_scales(&self) -> (f64, f64) {
        (self.v_a, self.v * self.v / self.v_b)
    }

    /// Standardised squared deviation of a coefficient pair from its prior location.
    pub fn coef_deviation(&self, coef: Coef) -> f64 {
        let (sa, sb) = self.coef_scales();
        (coef.a - self.alpha_a).powi(2) / sa + (coef.b - self.alpha_b).powi(2) / sb
    }
}

/// Probabilities of proposing Add / Delete / Swap for each model class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationMatrix {
    pub no_relationship: [f64; 3],
    pub all_regulated: [f64; 3],
    pub other: [f64; 3],
}

impl Default for OperationMatrix {
    fn default() -> Self {
        OperationMatrix {
            no_relationship: [1.0, 0.0, 0.0],
            all_regulated: [0.0, 0.8, 0.2],
            other: [0.3, 0.4, 0.3],
        }
    }
}

impl OperationMatrix {
    pub fn check(&self) -> Result<()> {
        for (name, row) in [
            ("no_relationship", &self.no_relationship),
            ("all_regulated", &self.all_regulated),
            ("other", &self.other),
        ] {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "operation row {name} must be nonnegative and sum to 1, got {row:?}"
                )));
            }
        }
        if self.no_relationship[1] != 0.0 || self.no_relationship[2] != 0.0 {
            return Err(Error::InvalidInput(
                "an empty model admits only Add moves".into(),
            ));
        }
        if self.all_regulated[0] != 0.0 {
            return Err(Error::InvalidInput(
                "a fully regulated model admits no Add move".into(),
            ));
        }
        Ok(())
    }

    pub fn row(&self, class: ModelClass) -> [f64; 3] {
        match class {
            ModelClass::NoRelationship => self.no_relationship,
            ModelClass::AllRegulated => self.all_regulated,
            ModelClass::OtherCase => self.other,
        }
    }

    /// Move-type probabilities for `model` at `transition`, with moves that
    /// cannot be carried out removed and the row renormalised. All zero when
    /// no move is possible.
    pub fn move_probs(&self, model: &RegulatoryModel, transition: usize) -> [f64; 3] {
        let mut row = self.row(model.classify(transition));
        let regs = model.regulated_count(transition);
        let k = model.targets();
        if regs == k {
            row[0] = 0.0;
        }
        if regs == 0 {
            row[1] = 0.0;
            row[2] = 0.0;
        }
        if k < 3 {
            row[2] = 0.0;
        }
        if k < 2 {
            row = [0.0; 3];
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        }
        row
    }
}
