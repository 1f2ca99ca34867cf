//! Detection, recall, error, precision and F1 of an estimated network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegulatoryModel;

/// Edge counts at one transition, or pooled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub truth: usize,
    pub detected: usize,
    pub correct: usize,
}

impl Counts {
    /// The five indexes; `None` when there is no true edge to compare with.
    pub fn indexes(&self) -> Option<Indexes> {
        if self.truth == 0 {
            return None;
        }
        let truth = self.truth as f64;
        let detected = self.detected as f64;
        let correct = self.correct as f64;
        let precision = if self.detected == 0 { 0.0 } else { correct / detected };
        let recall = correct / truth;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Some(Indexes {
            detection: detected / truth,
            recall,
            error: ((self.detected - self.correct) + (self.truth - self.correct)) as f64 / truth,
            precision,
            f1,
        })
    }

    fn add(&mut self, other: Counts) {
        self.truth += other.truth;
        self.detected += other.detected;
        self.correct += other.correct;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indexes {
    pub detection: f64,
    pub recall: f64,
    pub error: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Indexes {
    pub const NAMES: [&'static str; 5] = ["detection", "recall", "error", "precision", "f1"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "detection" => Some(self.detection),
            "recall" => Some(self.recall),
            "error" => Some(self.error),
            "precision" => Some(self.precision),
            "f1" => Some(self.f1),
            _ => None,
        }
    }
}

/// Per-transition and pooled indexes. Transitions without true edges have
/// `None` and are left out of the pooled counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: Vec<Counts>,
    pub transitions: Vec<Option<Indexes>>,
    pub total_counts: Counts,
    pub total: Option<Indexes>,
}

pub fn compute_metrics(truth: &RegulatoryModel, estimate: &RegulatoryModel) -> Result<MetricsReport> {
    if truth.genes() != estimate.genes()
        || truth.regions() != estimate.regions()
        || truth.transitions() != estimate.transitions()
    {
        return Err(Error::InvalidInput(
            "true and estimated networks have different dimensions".into(),
        ));
    }
    let mut counts = Vec::with_capacity(truth.transitions());
    let mut total = Counts::default();
    for t in 0..truth.transitions() {
        let mut c = Counts::default();
        for k in 0..truth.targets() {
            let (x, y) = (truth.source(t, k), estimate.source(t, k));
            c.truth += x.is_some() as usize;
            c.detected += y.is_some() as usize;
            c.correct += (x.is_some() && x == y) as usize;
        }
        if c.truth > 0 {
            total.add(c);
        }
        counts.push(c);
    }
    Ok(MetricsReport {
        transitions: counts.iter().map(Counts::indexes).collect(),
        counts,
        total_counts: total,
        total: total.indexes(),
    })
}
