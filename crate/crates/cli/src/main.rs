use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use stagenet::baselines::{pearson_network, PearsonMode};
use stagenet::engine::{extract_network, run_chain};
use stagenet::harness::{
    self, compute_metrics, load_dataset, parse_settings, read_network, run_benchmark,
    simulate_replicate, subsample_runs, Assignment, InferenceReport, NetworkReport, Settings,
    SETTING_KEYS,
};
use stagenet::Error;

#[derive(Parser, Debug)]
#[command(
    name = "stagenet",
    version,
    about = "Stage-transition gene regulatory network inference",
    after_help = "Every key of the settings file can also be given as a flag, e.g. --outer 40 --lambda 0.1."
)]
struct Cli {
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Settings file with `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for replicates and subsampled runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineMethod {
    Pearson1,
    Pearson2,
    Pearson3,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset (CSV) from a random network.
    Simulate {
        /// Also write the true network as JSON.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
    /// Infer networks from a dataset with the sampler.
    Infer {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
    },
    /// Infer networks with a correlation baseline.
    Baseline {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: BaselineMethod,
    },
    /// Replicated simulation benchmark of the selected methods.
    Benchmark,
    /// Repeated inference on weighted subsets of genes and regions.
    Subsample {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
    },
    /// Compare an estimated network with the true one.
    Metrics {
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        #[arg(long, value_name = "FILE")]
        estimate: PathBuf,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn command() -> clap::Command {
    let overrides = SETTING_KEYS
        .iter()
        .filter(|(key, _)| *key != "seed")
        .map(|(key, help)| {
            Arg::new(*key)
                .long(*key)
                .help(*help)
                .value_name("VALUE")
                .global(true)
                .hide_short_help(true)
        });
    Cli::command().args(overrides)
}

fn settings(cli: &Cli, matches: &ArgMatches) -> Result<Settings, Failure> {
    let mut list = Vec::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        list = parse_settings(&text, &path.display().to_string()).map_err(Failure::usage)?;
    }
    for (key, _) in SETTING_KEYS {
        if *key == "seed" {
            continue;
        }
        if let Some(value) = matches.get_one::<String>(key) {
            list.push(Assignment::flag(key, value));
        }
    }
    if let Some(seed) = cli.seed {
        list.push(Assignment::flag("seed", &seed.to_string()));
    }
    Settings::from_assignments(&list).map_err(Failure::usage)
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => harness::write_text(path, content).map_err(Failure::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::from(Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }))
        }
    }
}

fn stages_hint(matches: &ArgMatches) -> Option<usize> {
    matches.get_one::<String>("stages").and_then(|s| s.parse().ok())
}

fn run(cli: &Cli, matches: &ArgMatches, s: &Settings) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    let json = cli.format == Format::Json;
    match &cli.command {
        Command::Simulate { truth } => {
            let (model, _, data) = simulate_replicate(&s.bench, 0)?;
            if let Some(path) = truth {
                let report = NetworkReport::new(&model, "truth");
                harness::write_text(path, &harness::network_json(&report)?)?;
            }
            match out {
                Some(path) => harness::write_dataset(&data, path)?,
                None => {
                    harness::write_dataset_to(&data, std::io::stdout().lock())
                        .map_err(|e| Failure::from(Error::Io {
                            path: PathBuf::from("<stdout>"),
                            source: std::io::Error::other(e),
                        }))?
                }
            }
        }
        Command::Infer { data } => {
            let dataset = load_dataset(data, stages_hint(matches))?;
            let summary = run_chain(&dataset, &s.prior, &s.mcmc)?;
            let network = extract_network(&summary, s.min_support);
            let report = InferenceReport::new(&summary, &network, s.min_support, &s.prior, &s.mcmc);
            let text = if json {
                harness::inference_json(&report)?
            } else {
                harness::inference_tsv(&report)
            };
            emit(out, &text)?;
        }
        Command::Baseline { data, method } => {
            let dataset = load_dataset(data, stages_hint(matches))?;
            let mode = match method {
                BaselineMethod::Pearson1 => PearsonMode::P1,
                BaselineMethod::Pearson2 => PearsonMode::P2,
                BaselineMethod::Pearson3 => PearsonMode::P3,
            };
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(s.seed);
            let model = pearson_network(&dataset, mode, &s.forest, &mut rng)?;
            let report = NetworkReport::new(&model, mode.name());
            let text = if json {
                harness::network_json(&report)?
            } else {
                harness::network_tsv(&report)
            };
            emit(out, &text)?;
        }
        Command::Benchmark => {
            let start = Instant::now();
            let report = run_benchmark(&s.bench)?;
            eprintln!(
                "benchmark: {} replicates in {:.1} s",
                s.bench.replicates,
                start.elapsed().as_secs_f64()
            );
            let text = if json {
                harness::benchmark_json(&report)?
            } else {
                harness::benchmark_tsv(&report)
            };
            emit(out, &text)?;
        }
        Command::Subsample { data } => {
            let dataset = load_dataset(data, stages_hint(matches))?;
            let report = subsample_runs(&dataset, &s.subsample, &s.prior, &s.mcmc)?;
            let text = if json {
                harness::subsample_json(&report)?
            } else {
                harness::subsample_tsv(&report, dataset.dims.transitions())
            };
            emit(out, &text)?;
        }
        Command::Metrics { truth, estimate } => {
            let report = compute_metrics(&read_network(truth)?, &read_network(estimate)?)?;
            let text = if json {
                harness::metrics_json(&report)?
            } else {
                harness::metrics_tsv(&report)
            };
            emit(out, &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return ExitCode::from(code);
        }
    };
    let result = Cli::from_arg_matches(&matches)
        .map_err(Failure::usage)
        .and_then(|cli| {
            let s = settings(&cli, &matches)?;
            if let Some(n) = cli.threads {
                if n == 0 {
                    return Err(Failure::usage("--threads must be positive"));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(Failure::usage)?;
            }
            run(&cli, &matches, &s)
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
