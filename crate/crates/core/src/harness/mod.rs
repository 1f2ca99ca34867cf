//! Evaluation and plumbing around the sampler: metrics against a known
//! network, replicated benchmarks, subsampled runs for wide datasets, file
//! formats and run settings.

mod benchmark;
mod io;
mod metrics;
mod report;
mod settings;
mod subsample;

pub use benchmark::{
    run_benchmark, run_replicate, simulate_replicate, Aggregate, BenchConfig, BenchmarkReport, IndexRow, Method, MethodReport,
    ReplicateOutcome,
};
pub use io::{load_dataset, parse_dataset, write_dataset, write_dataset_to, CSV_HEADER};
pub use metrics::{compute_metrics, Counts, Indexes, MetricsReport};
pub use report::{
    benchmark_json, benchmark_tsv, edge_string, inference_json, inference_tsv, metrics_json,
    metrics_tsv, network_json, network_tsv, read_network, subsample_json, subsample_tsv,
    transition_label, write_text, EdgeOut, InferenceReport, NetworkEdge, NetworkMeta, NetworkReport,
    NetworkTransition, Site,
};
pub use settings::{parse_settings, Assignment, Settings, SETTING_KEYS};
pub use subsample::{
    gene_weights, region_weights, restrict, sample_without_replacement, subsample_runs, MergedEdge,
    SubRun, SubsampleConfig, SubsampleReport,
};
