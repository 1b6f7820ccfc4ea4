use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsgms::concentration::QuadraticForm;
use nsgms::decorrelation::{to_block_samples, StationarySeries};
use nsgms::experiment::{emit_csv, lemma_csv, log_grid, run_experiment, run_lemma_check, ExperimentConfig};
use nsgms::regression::{estimate_all_neighborhoods, estimate_neighborhood_factored, combine_neighborhoods};
use nsgms::{
    build_block_model, default_lambda, random_cig, sample_process, BlockFactors, BlockModel, CombineRule, Error,
    EstimatorConfig, SampleBlocks,
};

#[derive(Parser)]
#[command(name = "nsgms", version, about = "Graphical model selection from block-wise non-stationary Gaussian data")]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph and block model and write it as `nsgms-model v1`.
    Model(ModelArgs),
    /// Draw block samples from a model file.
    Sample(SampleArgs),
    /// Estimate one neighbourhood or the whole graph from a samples file.
    Estimate(EstimateArgs),
    /// Map a stationary record to frequency-domain blocks.
    Decorrelate(DecorrelateArgs),
    /// Compare the quadratic-form tail bound against Monte Carlo frequencies.
    Lemma(LemmaArgs),
    /// Run a Monte Carlo experiment described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    p: usize,
    /// Degree bound of the random graph (0 for the empty graph).
    #[arg(long)]
    s_max: usize,
    #[arg(long = "blocks", short = 'B')]
    blocks: usize,
    #[arg(long = "block-length", short = 'L')]
    block_len: usize,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the graph as an edge list.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write little-endian f64 with the header in `<out>.hdr`.
    #[arg(long, requires = "out")]
    binary: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Candidate-set budget.
    #[arg(long)]
    s: usize,
    /// Penalty weight.
    #[arg(long, conflicts_with = "rho_min", required_unless_present = "rho_min")]
    lambda: Option<f64>,
    /// Use the penalty rho_min / 6.
    #[arg(long)]
    rho_min: Option<f64>,
    /// One-based node; omit to estimate the whole graph.
    #[arg(long)]
    node: Option<usize>,
    #[arg(long, default_value = "or")]
    rule: CombineRule,
    #[arg(long, default_value_t = nsgms::regression::DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Print every node's neighbourhood before the edge list.
    #[arg(long)]
    verbose: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecorrelateArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Correlation width W; must divide the record length.
    #[arg(long)]
    width: usize,
    #[arg(long, requires = "out")]
    binary: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmaArgs {
    /// Comma-separated quadratic coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "b")]
    a: Vec<f64>,
    /// Comma-separated linear coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Vec<f64>,
    /// Draw a random form of this length instead of giving a and b.
    #[arg(long, conflicts_with = "a")]
    random_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    form_seed: u64,
    /// Comma-separated deviation levels.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    /// `lo,hi,count` log-spaced deviations, used when --eta is absent.
    #[arg(long, value_delimiter = ',')]
    eta_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn write_output(out: Option<&Path>, text: &str) -> nsgms::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_model(args: ModelArgs) -> nsgms::Result<()> {
    let cig = if args.s_max == 0 {
        nsgms::Cig::empty(args.p)
    } else {
        random_cig(args.p, args.s_max, args.seed)?
    };
    let model = build_block_model(&cig, args.blocks, args.block_len, args.beta, args.coupling, args.seed)?;
    if let Some(path) = &args.graph_out {
        std::fs::write(path, cig.to_edge_list())?;
    }
    write_output(args.out.as_deref(), &model.to_text())
}

fn cmd_sample(args: SampleArgs) -> nsgms::Result<()> {
    let model = BlockModel::parse(&std::fs::read_to_string(&args.model)?)?;
    let samples = sample_process(&model, args.seed)?;
    match &args.out {
        Some(path) => samples.write(path, args.binary),
        None => write_output(None, &samples.to_text()),
    }
}

fn cmd_estimate(args: EstimateArgs) -> nsgms::Result<()> {
    let samples = SampleBlocks::read(&args.samples)?;
    let lambda = match (args.lambda, args.rho_min) {
        (Some(l), _) => l,
        (None, Some(r)) => default_lambda(r)?,
        (None, None) => unreachable!("clap requires one of --lambda/--rho-min"),
    };
    let config = EstimatorConfig::new(args.s, lambda)?.with_rank_tol(args.rank_tol)?;
    let factors = BlockFactors::from_samples(&samples);
    let text = match args.node {
        Some(node) => {
            if node == 0 || node > samples.p() {
                return Err(Error::IndexOutOfRange { index: node, dim: samples.p() });
            }
            let est = estimate_neighborhood_factored(&factors, node - 1, &config)?;
            format!("{}\n", est.to_line())
        }
        None => {
            let all = estimate_all_neighborhoods(&factors, &config)?;
            let mut text = String::new();
            if args.verbose {
                for est in &all {
                    text.push_str(&est.to_line());
                    text.push('\n');
                }
            }
            text.push_str(&combine_neighborhoods(samples.p(), &all, args.rule).to_edge_list());
            text
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn cmd_decorrelate(args: DecorrelateArgs) -> nsgms::Result<()> {
    let samples = SampleBlocks::read(&args.samples)?;
    let series = StationarySeries::from_samples(&samples, args.width)?;
    let blocks = to_block_samples(&series)?;
    match &args.out {
        Some(path) => blocks.write(path, args.binary),
        None => write_output(None, &blocks.to_text()),
    }
}

fn cmd_lemma(args: LemmaArgs) -> nsgms::Result<()> {
    let form = match args.random_len {
        Some(len) => QuadraticForm::random(len, args.form_seed)?,
        None => QuadraticForm::new(args.a, args.b)?,
    };
    let etas = if !args.eta.is_empty() {
        args.eta
    } else if let [lo, hi, count] = args.eta_grid[..] {
        if !(lo > 0.0 && hi >= lo && count >= 1.0) {
            return Err(Error::InvalidParameter("eta grid needs 0 < lo <= hi and count >= 1".into()));
        }
        log_grid(lo, hi, count as usize)
    } else if args.eta_grid.is_empty() {
        return Err(Error::InvalidParameter("give --eta or --eta-grid".into()));
    } else {
        return Err(Error::InvalidParameter("--eta-grid takes lo,hi,count".into()));
    };
    let rows = run_lemma_check(&form, &etas, args.trials, args.seed)?;
    write_output(args.out.as_deref(), &lemma_csv(&rows))
}

fn cmd_experiment(args: ExperimentArgs) -> nsgms::Result<()> {
    let config = ExperimentConfig::parse(&std::fs::read_to_string(&args.config)?)?;
    let result = run_experiment(&config)?;
    match &args.out {
        Some(path) => emit_csv(&result, path),
        None => write_output(None, &result.to_csv()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Model(a) => cmd_model(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Decorrelate(a) => cmd_decorrelate(a),
        Command::Lemma(a) => cmd_lemma(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
