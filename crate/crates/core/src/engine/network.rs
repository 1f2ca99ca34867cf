//! Point estimates of the network from sampled configuration frequencies.

use serde::{Deserialize, Serialize};

use crate::model::{Dims, RegulatoryModel, TargetId};
use crate::samplers::config_source;

use super::ChainSummary;

/// A detected regulation and the fraction of samples supporting it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// 0-based transition.
    pub transition: usize,
    pub target: TargetId,
    pub source: TargetId,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedNetwork {
    pub model: RegulatoryModel,
    pub edges: Vec<Edge>,
}

/// Takes the most frequent configuration of every target; keeps it when it
/// is a regulation with support at least `min_support`. Ties go to "not
/// regulated", then to the lowest source index.
pub fn extract_network(summary: &ChainSummary, min_support: f64) -> ExtractedNetwork {
    let r = summary.regions;
    let transitions = summary.transitions();
    let dims = Dims {
        stages: transitions + 1,
        genes: summary.genes,
        regions: r,
        per_stage: vec![0; transitions + 1],
    };
    let mut model = RegulatoryModel::empty(&dims);
    let mut edges = Vec::new();
    for (t, layer) in summary.frequencies.iter().enumerate() {
        for (k, freqs) in layer.iter().enumerate() {
            let mut best = 0;
            for (i, f) in freqs.iter().enumerate() {
                if *f > freqs[best] {
                    best = i;
                }
            }
            let Some(s) = config_source(k, best) else {
                continue;
            };
            if freqs[best] >= min_support && freqs[best] > 0.0 {
                model.set_source(t, k, Some(s));
                edges.push(Edge {
                    transition: t,
                    target: TargetId::from_index(k, r),
                    source: TargetId::from_index(s, r),
                    support: freqs[best],
                });
            }
        }
    }
    ExtractedNetwork { model, edges }
}
