//! Result files: JSON with everything, TSV tables for reading.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ChainSummary, Diagnostics, ExtractedNetwork, McmcConfig, ParamMeans};
use crate::error::{Error, Result};
use crate::model::{Dims, PriorConfig, RegulatoryModel, TargetId};
use crate::samplers::config_source;

use super::benchmark::BenchmarkReport;
use super::metrics::{Indexes, MetricsReport};
use super::subsample::SubsampleReport;

/// A (gene, region) pair, 1-based as in the dataset files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub gene: usize,
    pub region: usize,
}

impl From<TargetId> for Site {
    fn from(t: TargetId) -> Self {
        Site {
            gene: t.gene + 1,
            region: t.region + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeOut {
    pub target: Site,
    pub source: Site,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceFrequency {
    /// `None` for "not regulated".
    pub source: Option<Site>,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFrequencies {
    pub target: Site,
    /// Every configuration sampled at least once, most frequent first.
    pub configurations: Vec<SourceFrequency>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionOut {
    /// 1-based stages.
    pub from: usize,
    pub to: usize,
    pub edges: Vec<EdgeOut>,
    pub frequencies: Vec<TargetFrequencies>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub genes: usize,
    pub regions: usize,
    pub stages: usize,
    pub samples: usize,
    pub min_support: f64,
    pub prior: PriorConfig,
    pub mcmc: McmcConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub meta: Meta,
    pub transitions: Vec<TransitionOut>,
    pub params: ParamMeans,
    pub diagnostics: Diagnostics,
}

impl InferenceReport {
    pub fn new(
        summary: &ChainSummary,
        network: &ExtractedNetwork,
        min_support: f64,
        prior: &PriorConfig,
        mcmc: &McmcConfig,
    ) -> Self {
        let r = summary.regions;
        let transitions = (0..summary.transitions())
            .map(|t| {
                let edges = network
                    .edges
                    .iter()
                    .filter(|e| e.transition == t)
                    .map(|e| EdgeOut {
                        target: e.target.into(),
                        source: e.source.into(),
                        support: e.support,
                    })
                    .collect();
                let frequencies = summary.frequencies[t]
                    .iter()
                    .enumerate()
                    .map(|(k, freqs)| {
                        let mut configurations: Vec<SourceFrequency> = freqs
                            .iter()
                            .enumerate()
                            .filter(|(_, f)| **f > 0.0)
                            .map(|(i, &frequency)| SourceFrequency {
                                source: config_source(k, i).map(|s| TargetId::from_index(s, r).into()),
                                frequency,
                            })
                            .collect();
                        configurations.sort_by(|a, b| b.frequency.total_cmp(&a.frequency));
                        TargetFrequencies {
                            target: TargetId::from_index(k, r).into(),
                            configurations,
                        }
                    })
                    .collect();
                TransitionOut {
                    from: t + 1,
                    to: t + 2,
                    edges,
                    frequencies,
                }
            })
            .collect();
        InferenceReport {
            meta: Meta {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                genes: summary.genes,
                regions: summary.regions,
                stages: summary.transitions() + 1,
                samples: summary.samples,
                min_support,
                prior: prior.clone(),
                mcmc: mcmc.clone(),
            },
            transitions,
            params: summary.params.clone(),
            diagnostics: summary.diagnostics.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    #[serde(default)]
    pub tool: String,
    #[serde(default)]
    pub version: String,
    /// What produced the network: a method name or `truth`.
    #[serde(default)]
    pub method: String,
    pub genes: usize,
    pub regions: usize,
    pub stages: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub target: Site,
    pub source: Site,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTransition {
    pub from: usize,
    pub to: usize,
    pub edges: Vec<NetworkEdge>,
}

/// A bare network. Inference reports share its `meta` dimensions and
/// `transitions[].edges` layout, so [`read_network`] accepts either.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub meta: NetworkMeta,
    pub transitions: Vec<NetworkTransition>,
}

impl NetworkReport {
    pub fn new(model: &RegulatoryModel, method: &str) -> Self {
        let r = model.regions();
        NetworkReport {
            meta: NetworkMeta {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                method: method.to_string(),
                genes: model.genes(),
                regions: r,
                stages: model.transitions() + 1,
            },
            transitions: (0..model.transitions())
                .map(|t| NetworkTransition {
                    from: t + 1,
                    to: t + 2,
                    edges: model
                        .edges(t)
                        .into_iter()
                        .map(|(k, s)| NetworkEdge {
                            target: TargetId::from_index(k, r).into(),
                            source: TargetId::from_index(s, r).into(),
                            support: None,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<RegulatoryModel> {
        let m = &self.meta;
        let dims = Dims::new(m.stages, m.genes, m.regions, vec![1; m.stages])?;
        let mut model = RegulatoryModel::empty(&dims);
        for tr in &self.transitions {
            if tr.from == 0 || tr.to != tr.from + 1 || tr.to > m.stages {
                return Err(Error::InvalidInput(format!(
                    "transition {} -> {} does not fit {} stages",
                    tr.from, tr.to, m.stages
                )));
            }
            for e in &tr.edges {
                let index = |s: Site| -> Result<usize> {
                    if s.gene == 0 || s.region == 0 || s.gene > m.genes || s.region > m.regions {
                        return Err(Error::InvalidInput(format!(
                            "site {},{} outside {} genes and {} regions",
                            s.gene, s.region, m.genes, m.regions
                        )));
                    }
                    Ok(TargetId::new(s.gene - 1, s.region - 1).index(m.regions))
                };
                let (k, s) = (index(e.target)?, index(e.source)?);
                if k == s {
                    return Err(Error::InvalidInput(format!(
                        "site {},{} cannot regulate itself",
                        e.target.gene, e.target.region
                    )));
                }
                if model.source(tr.from - 1, k).is_some() {
                    return Err(Error::InvalidInput(format!(
                        "site {},{} has two regulators at stage {} -> {}",
                        e.target.gene, e.target.region, tr.from, tr.to
                    )));
                }
                model.set_source(tr.from - 1, k, Some(s));
            }
        }
        Ok(model)
    }
}

/// Reads the network from a JSON file written by `simulate`, `baseline` or
/// `infer`.
pub fn read_network(path: &Path) -> Result<RegulatoryModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: NetworkReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    report.to_model()
}

pub fn network_json(report: &NetworkReport) -> Result<String> {
    to_json(report)
}

/// Like [`inference_tsv`], with support shown only where known.
pub fn network_tsv(report: &NetworkReport) -> String {
    let mut out = String::from("transition\tedges\n");
    for (t, tr) in report.transitions.iter().enumerate() {
        out.push_str(&transition_label(t));
        for e in &tr.edges {
            let site = |s: Site| TargetId::new(s.gene - 1, s.region - 1);
            out.push('\t');
            match e.support {
                Some(p) => out.push_str(&edge_string(site(e.target), site(e.source), p)),
                None => {
                    let _ = write!(out, "{} - {}", site(e.target), site(e.source));
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Rows are indexes, columns the transitions and the pooled total.
pub fn metrics_tsv(report: &MetricsReport) -> String {
    let mut out = String::from("index");
    for t in 0..report.transitions.len() {
        let _ = write!(out, "\t{}", transition_label(t));
    }
    out.push_str("\tTotal\n");
    for name in Indexes::NAMES {
        out.push_str(name);
        for cell in report.transitions.iter().chain(std::iter::once(&report.total)) {
            match cell.and_then(|i| i.get(name)) {
                Some(v) => {
                    let _ = write!(out, "\t{v:.4}");
                }
                None => out.push_str("\tNA"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn metrics_json(report: &MetricsReport) -> Result<String> {
    to_json(report)
}

pub fn subsample_json(report: &SubsampleReport) -> Result<String> {
    to_json(report)
}

/// One line per transition listing every merged edge once per run that
/// found it, tagged with the run number.
pub fn subsample_tsv(report: &SubsampleReport, transitions: usize) -> String {
    let mut out = String::from("transition\tedges\n");
    for t in 0..transitions {
        out.push_str(&transition_label(t));
        for e in report.merged.iter().filter(|e| e.transition == t) {
            for &(run, support) in &e.supports {
                let _ = write!(out, "\t{} [run {}]", edge_string(e.target, e.source, support), run + 1);
            }
        }
        out.push('\n');
    }
    out
}

/// `"3,2 - 5,2 (21.50%)"`: target, then source, then support.
pub fn edge_string(target: TargetId, source: TargetId, support: f64) -> String {
    format!("{target} - {source} ({:.2}%)", support * 100.0)
}

/// `"Stage 1 -> 2"` for 0-based transition 0.
pub fn transition_label(t: usize) -> String {
    format!("Stage {} -> {}", t + 1, t + 2)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot encode results: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn inference_json(report: &InferenceReport) -> Result<String> {
    to_json(report)
}

/// One line per transition: its label, then its edges, tab-separated.
pub fn inference_tsv(report: &InferenceReport) -> String {
    let mut out = String::from("transition\tedges\n");
    for (t, tr) in report.transitions.iter().enumerate() {
        out.push_str(&transition_label(t));
        for e in &tr.edges {
            let site = |s: Site| TargetId::new(s.gene - 1, s.region - 1);
            out.push('\t');
            out.push_str(&edge_string(site(e.target), site(e.source), e.support));
        }
        out.push('\n');
    }
    out
}

pub fn benchmark_json(report: &BenchmarkReport) -> Result<String> {
    to_json(report)
}

/// Rows are index × transition (and Total), columns are methods; each cell
/// is `mean (variance)` over the replicates.
pub fn benchmark_tsv(report: &BenchmarkReport) -> String {
    let mut out = String::from("index\ttransition");
    for m in &report.methods {
        out.push('\t');
        out.push_str(m.method.name());
    }
    out.push('\n');
    let transitions = report.config.stages - 1;
    for name in Indexes::NAMES {
        for t in 0..=transitions {
            let label = if t < transitions {
                transition_label(t)
            } else {
                "Total".to_string()
            };
            let _ = write!(out, "{name}\t{label}");
            for m in &report.methods {
                let cell = m.row(name).and_then(|row| {
                    if t < transitions {
                        row.transitions[t]
                    } else {
                        row.total
                    }
                });
                match cell {
                    Some(a) => {
                        let _ = write!(out, "\t{:.4} ({:.4})", a.mean, a.variance);
                    }
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}
