//! `linc` — causal discovery for linear cyclic models from overlapping
//! experimental data sets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use linc_core::algorithms::{
    run_bilin, run_ehs, run_heh, run_lininf, AlgorithmConfig, EdgePredictionMatrix,
};
use linc_core::experiments::{
    exact_dataset, read_dataset, sample_data, write_dataset, DataSet, SpecJson, SpecsFile,
};
use linc_core::faithfulness::constraints_to_json_lines;
use linc_core::harness::{random_experiments, run_benchmark, BenchmarkConfig};
use linc_core::identifiability::{plan_experiments, spencer_min_experiments, CoverageReport};
use linc_core::model::{random_model, LinearCyclicModel, RandomModelConfig};

#[derive(Parser)]
#[command(
    name = "linc",
    about = "Causal discovery of linear cyclic models from overlapping experimental data sets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random weakly stable model and write it as JSON.
    GenModel(GenModelArgs),
    /// Generate random overlapping experiment specifications.
    GenExperiments(GenExperimentsArgs),
    /// Simulate datasets for a model under a list of experiments.
    Simulate(SimulateArgs),
    /// Run a discovery algorithm over dataset files.
    Discover(DiscoverArgs),
    /// Report pair-condition coverage for a list of experiments.
    CheckId(CheckIdArgs),
    /// Plan additional experiments to reach full identifiability.
    Plan(PlanArgs),
    /// Run the simulation benchmark and write score tables.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenModelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0.15)]
    confounder_prob: f64,
    #[arg(long, default_value_t = 0.2)]
    coeff_low: f64,
    #[arg(long, default_value_t = 0.8)]
    coeff_high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenExperimentsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Experiment specs JSON file.
    #[arg(long)]
    specs: PathBuf,
    /// Samples per experiment (ignored with --exact).
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Emit exact covariances (the infinite-sample limit).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the dataset files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Ehs,
    Heh,
    Bilin,
    Lininf,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    /// Dataset files (*.csv with *.meta.json sidecars, or *.exact.json).
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Size of the joint variable universe.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level for finite-sample independence tests.
    #[arg(long)]
    alpha: Option<f64>,
    /// Conditioning set cap for the faithfulness search.
    #[arg(long)]
    max_cond_size: Option<usize>,
    /// Determined magnitudes below this count as absent.
    #[arg(long)]
    zero_tol: Option<f64>,
    /// Require exact-covariance inputs (error on sample files).
    #[arg(long)]
    exact: bool,
    /// Dump derived faithfulness constraints as JSON lines.
    #[arg(long)]
    dump_constraints: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckIdArgs {
    #[arg(long)]
    specs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    n: usize,
    /// Existing experiments to complete (optional).
    #[arg(long)]
    specs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config JSON; defaults to the full 100-model setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the 20-model desk-scale configuration.
    #[arg(long)]
    desk: bool,
    /// Override the model count.
    #[arg(long)]
    models: Option<usize>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for score.csv, score.json and raw.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({ "error": e.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::GenModel(args) => {
            let config = RandomModelConfig {
                n: args.n,
                edge_prob: args.edge_prob,
                confounder_prob: args.confounder_prob,
                coeff_low: args.coeff_low,
                coeff_high: args.coeff_high,
            };
            let model = random_model(&config, args.seed)?;
            emit_json(&model.to_json(), args.out.as_deref())?;
        }
        Command::GenExperiments(args) => {
            let specs = random_experiments(args.n, args.count, args.seed);
            let file = SpecsFile {
                n: args.n,
                experiments: specs.iter().map(SpecJson::from_spec).collect(),
            };
            emit_json(&file, args.out.as_deref())?;
        }
        Command::Simulate(args) => {
            let model = LinearCyclicModel::read_json(&args.model)?;
            let specs = read_specs(&args.specs)?;
            if specs.0 != model.n() {
                return Err(format!(
                    "specs are over {} variables, model over {}",
                    specs.0,
                    model.n()
                )
                .into());
            }
            std::fs::create_dir_all(&args.out_dir)?;
            let mut written = Vec::new();
            for (i, spec) in specs.1.iter().enumerate() {
                let ds = if args.exact {
                    exact_dataset(&model, spec)?
                } else {
                    sample_data(&model, spec, args.samples, args.seed.wrapping_add(i as u64))?
                };
                let stem = format!("exp_{i:03}");
                written.extend(write_dataset(&ds, &args.out_dir, &stem)?);
            }
            let listing: Vec<String> = written
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect();
            println!("{}", serde_json::json!({ "written": listing }));
        }
        Command::Discover(args) => {
            let datasets: Result<Vec<DataSet>, _> = args
                .data
                .iter()
                .map(|p| read_dataset(p, args.n))
                .collect();
            let datasets = datasets?;
            if args.exact {
                if let Some(bad) = datasets.iter().position(|d| !d.is_exact()) {
                    return Err(format!(
                        "--exact given but {} holds finite samples",
                        args.data[bad].display()
                    )
                    .into());
                }
            }
            let mut cfg = AlgorithmConfig::for_datasets(&datasets);
            if let Some(alpha) = args.alpha {
                cfg.alpha = alpha;
            }
            if args.max_cond_size.is_some() {
                cfg.max_cond_size = args.max_cond_size;
            }
            if let Some(zero_tol) = args.zero_tol {
                cfg.zero_tol = zero_tol;
            }
            if let Some(path) = &args.dump_constraints {
                let constraints = linc_core::algorithms::dump_constraints(&datasets, &cfg)?;
                std::fs::write(path, constraints_to_json_lines(&constraints))?;
            }
            let predictions: EdgePredictionMatrix = match args.algorithm {
                AlgorithmArg::Ehs => run_ehs(args.n, &datasets, &cfg)?.predictions,
                AlgorithmArg::Heh => run_heh(args.n, &datasets, &cfg)?.predictions,
                AlgorithmArg::Bilin => run_bilin(args.n, &datasets, &cfg, args.seed)?.predictions,
                AlgorithmArg::Lininf => {
                    run_lininf(args.n, &datasets, &cfg, args.seed)?.predictions
                }
            };
            emit_json(&predictions.to_json(), args.out.as_deref())?;
        }
        Command::CheckId(args) => {
            let (n, specs) = read_specs(&args.specs)?;
            let report = CoverageReport::new(&specs, n);
            emit_json(&report, args.out.as_deref())?;
        }
        Command::Plan(args) => {
            let existing = match &args.specs {
                Some(path) => {
                    let (n, specs) = read_specs(path)?;
                    if n != args.n {
                        return Err(
                            format!("specs are over {n} variables, --n is {}", args.n).into()
                        );
                    }
                    specs
                }
                None => Vec::new(),
            };
            let plan = plan_experiments(args.n, &existing)?;
            let mut all = existing.clone();
            all.extend(plan.iter().cloned());
            let payload = serde_json::json!({
                "n": args.n,
                "spencer_min_experiments": spencer_min_experiments(args.n),
                "plan": SpecsFile {
                    n: args.n,
                    experiments: plan.iter().map(SpecJson::from_spec).collect(),
                },
                "coverage_after": CoverageReport::new(&all, args.n),
            });
            emit_json(&payload, args.out.as_deref())?;
        }
        Command::Bench(args) => {
            let mut config = if let Some(path) = &args.config {
                serde_json::from_reader(std::fs::File::open(path)?)?
            } else if args.desk {
                BenchmarkConfig::desk_scale()
            } else {
                BenchmarkConfig::default()
            };
            if args.desk && args.config.is_some() {
                config.model_count = config.model_count.min(20);
            }
            if let Some(models) = args.models {
                config.model_count = models;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let report = run_benchmark(&config)?;
            std::fs::create_dir_all(&args.out_dir)?;
            std::fs::write(args.out_dir.join("score.csv"), report.table.to_csv())?;
            serde_json::to_writer_pretty(
                std::fs::File::create(args.out_dir.join("score.json"))?,
                &report.table,
            )?;
            let mut raw = String::new();
            for record in &report.raw {
                raw.push_str(&serde_json::to_string(record)?);
                raw.push('\n');
            }
            std::fs::write(args.out_dir.join("raw.jsonl"), raw)?;
            print_summary(&report.table);
        }
    }
    Ok(())
}

fn print_summary(table: &linc_core::harness::ScoreTable) {
    println!(
        "scored {} models ({} failed), {} true edges total",
        table.models_scored, table.models_failed, table.total_true_edges
    );
    print!("{}", table.to_csv());
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_specs(
    path: &Path,
) -> Result<(usize, Vec<linc_core::ExperimentSpec>), Box<dyn std::error::Error>> {
    let file: SpecsFile = serde_json::from_reader(std::fs::File::open(path)?)?;
    let specs: Result<Vec<_>, _> = file
        .experiments
        .iter()
        .map(|s| s.into_spec(file.n))
        .collect();
    Ok((file.n, specs?))
}
