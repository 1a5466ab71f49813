use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use foiltree::dataset::{load_csv, load_fixture, split, Schema, DEFAULT_SPLIT_SEED, DEFAULT_TEST_FRACTION};
use foiltree::evaluation::{run_grid, EvalConfig};
use foiltree::explanation::{explain_with_tree, render_text, ExplainerConfig, Verbosity};
use foiltree::foil::{StrategyKind, TreeParams};
use foiltree::models::{fit, Hyperparams, ModelKind};
use foiltree::sampling::{SamplingMethod, DEFAULT_SAMPLE_SIZE};
use foiltree::service::{serve, AppState, ServiceConfig, DEFAULT_CACHE_SIZE};
use foiltree::Error;

const DEFAULT_DATA_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

/// Contrastive "why A and not B?" explanations for tabular classifiers.
///
/// Every flag can also be set through an environment variable with the
/// FOILTREE_ prefix, shown next to each flag.
#[derive(Parser, Debug)]
#[command(name = "foiltree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explain one instance of a dataset's test split.
    Explain(ExplainArgs),
    /// Run the benchmark grid and print the results table.
    Evaluate(EvaluateArgs),
    /// Serve the HTTP API until interrupted.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
struct ExplainerArgs {
    /// Local sampling method.
    #[arg(long, env = "FOILTREE_SAMPLING", default_value = "sampled-existing")]
    sampling: SamplingMethod,
    /// Local sample size.
    #[arg(long, env = "FOILTREE_SAMPLES", default_value_t = DEFAULT_SAMPLE_SIZE)]
    samples: usize,
    /// Proximity kernel width in standardized units [default: 0.75 * sqrt(n_features)].
    #[arg(long, env = "FOILTREE_KERNEL_WIDTH")]
    kernel_width: Option<f64>,
    /// Maximum foil-tree depth.
    #[arg(long, env = "FOILTREE_MAX_DEPTH", default_value_t = TreeParams::default().max_depth)]
    max_depth: usize,
    /// Minimum leaf weight as a fraction of the total sample weight.
    #[arg(long, env = "FOILTREE_MIN_WEIGHT_LEAF", default_value_t = TreeParams::default().min_weight_fraction_leaf)]
    min_weight_leaf: f64,
    /// Minimum weighted impurity decrease for a split.
    #[arg(long, env = "FOILTREE_MIN_IMPURITY_DECREASE", default_value_t = TreeParams::default().min_impurity_decrease)]
    min_impurity_decrease: f64,
    /// Foil-leaf search strategy.
    #[arg(long, env = "FOILTREE_STRATEGY", value_enum, default_value_t = StrategyArg::Nearest)]
    strategy: StrategyArg,
    /// Accuracy penalty for the accuracy-weighted strategy.
    #[arg(long, env = "FOILTREE_LAMBDA", default_value_t = 2.0)]
    lambda: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StrategyArg {
    Nearest,
    AccuracyWeighted,
}

impl ExplainerArgs {
    fn config(&self) -> Result<ExplainerConfig, Error> {
        let config = ExplainerConfig {
            sampling: self.sampling,
            n_samples: self.samples,
            kernel_width: self.kernel_width,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_weight_fraction_leaf: self.min_weight_leaf,
                min_impurity_decrease: self.min_impurity_decrease,
            },
            strategy: match self.strategy {
                StrategyArg::Nearest => StrategyKind::Nearest,
                StrategyArg::AccuracyWeighted => StrategyKind::AccuracyWeighted { lambda: self.lambda },
            },
        };
        config.validate()?;
        if config.n_samples < foiltree::sampling::MIN_SAMPLE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "--samples must be at least {}",
                foiltree::sampling::MIN_SAMPLE_SIZE
            )));
        }
        Ok(config)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    /// Bundled dataset id (iris, diabetes, heart) or path to a CSV whose last column is the label.
    #[arg(long, env = "FOILTREE_DATASET")]
    dataset: String,
    /// Model kind: logistic-regression, random-forest, mlp or svm.
    #[arg(long, env = "FOILTREE_MODEL", default_value = "random-forest")]
    model: ModelKind,
    /// Row of the held-out test split to explain.
    #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
    index: Option<usize>,
    /// Comma-separated feature values to explain instead of a test row.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    instance: Option<Vec<f64>>,
    /// Contrast class, by name or index [default: second most likely class].
    #[arg(long)]
    foil: Option<String>,
    /// Seed for model training and local sampling.
    #[arg(long, env = "FOILTREE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    explainer: ExplainerArgs,
    #[arg(long, env = "FOILTREE_OUTPUT", value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
    /// Dialogue detail: qualitative (directions) or quantitative (adds bounds).
    #[arg(long, env = "FOILTREE_VERBOSITY", value_enum, default_value_t = VerbosityArg::Quantitative)]
    verbosity: VerbosityArg,
    /// Directory holding the bundled CSV files.
    #[arg(long, env = "FOILTREE_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    data_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum VerbosityArg {
    Qualitative,
    Quantitative,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Master seed; every split, model and explanation seed derives from it.
    #[arg(long, env = "FOILTREE_SEED", default_value_t = 42)]
    seed: u64,
    /// Datasets to include.
    #[arg(long, value_delimiter = ',', default_values_t = ["iris".to_string(), "diabetes".to_string(), "heart".to_string()])]
    datasets: Vec<String>,
    /// Models to include.
    #[arg(long, value_delimiter = ',', default_values_t = ModelKind::ALL.map(|k| k.id().to_string()))]
    models: Vec<String>,
    /// Repetitions with fresh explanation seeds.
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Held-out fraction.
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    #[command(flatten)]
    explainer: ExplainerArgs,
    /// Also write the structured report to this file.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Leave the time column out so that reports are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, env = "FOILTREE_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    data_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "FOILTREE_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "FOILTREE_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    data_dir: PathBuf,
    /// Number of recent trees kept for GET /trees/{id}.
    #[arg(long, env = "FOILTREE_CACHE_SIZE", default_value_t = DEFAULT_CACHE_SIZE)]
    cache_size: usize,
    #[command(flatten)]
    explainer: ExplainerArgs,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: format!("{}: {e}", e.code()),
        }
    }
}

fn load_dataset(spec: &str, data_dir: &Path) -> Result<foiltree::Dataset, Error> {
    match spec.parse::<Schema>() {
        Ok(Schema::Generic) | Err(_) => load_csv(spec, Schema::Generic),
        Ok(schema) => load_fixture(data_dir, schema),
    }
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Failure> {
    let config = args.explainer.config()?;
    let data = load_dataset(&args.dataset, &args.data_dir)?;
    let (train, test) = split(&data, DEFAULT_TEST_FRACTION, DEFAULT_SPLIT_SEED)?;
    let x = match (&args.index, &args.instance) {
        (Some(i), _) => test.x.get(*i).cloned().ok_or(Error::IndexOutOfRange {
            index: *i,
            len: test.n_instances(),
        })?,
        (None, Some(v)) => {
            if v.len() != data.n_features() {
                return Err(Error::ArityMismatch {
                    expected: data.n_features(),
                    got: v.len(),
                }
                .into());
            }
            v.clone()
        }
        (None, None) => unreachable!("clap requires --index or --instance"),
    };
    let foil = match &args.foil {
        Some(f) => Some(
            data.class_index(f)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown class '{f}'")))?,
        ),
        None => None,
    };
    let model = fit(args.model, &train, &Hyperparams::new(), args.seed)?;
    if let Some(w) = &model.warning {
        log::warn!("{w}");
    }
    let outcome = explain_with_tree(&model, &train, &x, foil, &config, args.seed)?;
    let verbosity = match args.verbosity {
        VerbosityArg::Qualitative => Verbosity::Qualitative,
        VerbosityArg::Quantitative => Verbosity::Quantitative,
    };
    let e = &outcome.explanation;
    match args.output {
        OutputFormat::Json => println!("{}", e.to_json_pretty()),
        OutputFormat::Text => {
            for line in render_text(e, &data.class_names, &data.features, verbosity) {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let explainer = args.explainer.config()?;
    let mut datasets = Vec::new();
    for d in &args.datasets {
        datasets.push(load_dataset(d, &args.data_dir)?);
    }
    let kinds = args
        .models
        .iter()
        .map(|m| m.parse::<ModelKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = EvalConfig {
        explainer,
        test_fraction: args.test_fraction,
        repetitions: args.repetitions,
    };
    let report = run_grid(&datasets, &kinds, &config, args.seed)?;
    print!("{}", report.render_table(!args.no_timing));
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json(!args.no_timing)).map_err(|e| Failure {
            code: 1,
            message: format!("cannot write {}: {e}", path.display()),
        })?;
    }
    if !report.failures.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!("{} (dataset, model) pair(s) failed", report.failures.len()),
        });
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = ServiceConfig::new(&args.data_dir);
    config.cache_size = args.cache_size;
    config.explainer = args.explainer.config()?;
    let state = Arc::new(AppState::new(config)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: 1,
        message: format!("cannot start runtime: {e}"),
    })?;
    runtime.block_on(serve(args.listen, state)).map_err(|e| Failure {
        code: 1,
        message: format!("cannot serve on {}: {e}", args.listen),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Explain(a) => cmd_explain(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
