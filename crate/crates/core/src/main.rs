use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ionboost::cli::{self, CliError, ConfigOverrides, ExperimentKind};

/// Boosting experiments: noise-influence measurement, exact XOR and
/// comonotonicity certification, and a factor-panel backtest.
#[derive(Parser)]
#[command(name = "ionboost", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Toy comparison table: Bayes baseline vs 1NN vs AdaBoost on the
    /// noisy half-plane.
    Toy(CommonArgs),
    /// Iteration sweep on the 6-d parity population (train/test/ION per m).
    SweepM(CommonArgs),
    /// Depth sweep on the 6-d parity population at fixed iterations.
    SweepDepth(CommonArgs),
    /// Certify exact 50% agreement of depth-capped trees vs the
    /// next-order XOR.
    Xor(CommonArgs),
    /// Certify stump-ensemble comonotonicity and exhibit non-comonotonic
    /// geometries.
    Comono(CommonArgs),
    /// Stump-vs-deep AdaBoost test error curves on a non-comonotonic
    /// population.
    Plateau(CommonArgs),
    /// Hyperparameter grid plus equal-weighted strategy simulation on a
    /// factor panel.
    Backtest(CommonArgs),
    /// Emit a synthetic factor panel CSV.
    SynthPanel(CommonArgs),
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Global seed; every sub-stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent seeds to average over.
    #[arg(long = "seeds")]
    seeds: Option<usize>,
    /// Output directory (created if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rayon worker count (outputs are identical for any value).
    #[arg(long)]
    workers: Option<usize>,
    /// Training-set size.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo evaluation points.
    #[arg(long)]
    mc: Option<usize>,
    /// Tree depth list, e.g. --depths 1,2,4.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Iteration list, e.g. --m-list 10,50,100.
    #[arg(long = "m-list", value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Input panel CSV (backtest); synthetic when omitted.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Synthetic panel months.
    #[arg(long)]
    months: Option<usize>,
    /// Synthetic panel stocks per month.
    #[arg(long)]
    stocks: Option<usize>,
    /// Synthetic panel factor count.
    #[arg(long)]
    factors: Option<usize>,
    /// Last training month (backtest split).
    #[arg(long)]
    cutoff: Option<i64>,
    /// Long leg size.
    #[arg(long)]
    n_long: Option<usize>,
    /// Short leg size.
    #[arg(long)]
    n_short: Option<usize>,
    /// Transaction cost per fully replaced name fraction per leg.
    #[arg(long)]
    cost_rate: Option<f64>,
    /// Plateau: maximum boosting iterations.
    #[arg(long)]
    steps_max: Option<usize>,
    /// Plateau: companion tree depth.
    #[arg(long)]
    deep_depth: Option<usize>,
    /// Plateau population: xor2|xor3|ring|diagonal|half_plane|parity.
    #[arg(long)]
    pop: Option<String>,
    /// Random trees per XOR certification case.
    #[arg(long)]
    trees: Option<usize>,
    /// Random ensembles for comonotonicity certification.
    #[arg(long)]
    stumps: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            experiment: None,
            seed: self.seed,
            seeds: self.seeds,
            out: self.out.clone(),
            workers: self.workers,
            n: self.n,
            mc: self.mc,
            depths: self.depths.clone(),
            m_list: self.m_list.clone(),
            panel: self.panel.clone(),
            months: self.months,
            stocks: self.stocks,
            factors: self.factors,
            cutoff: self.cutoff,
            n_long: self.n_long,
            n_short: self.n_short,
            cost_rate: self.cost_rate,
            steps_max: self.steps_max,
            deep_depth: self.deep_depth,
            pop: self.pop.clone(),
            trees: self.trees,
            stumps: self.stumps,
        }
    }
}

fn execute(kind: ExperimentKind, args: &CommonArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => cli::parse_config_file(path)?,
        None => ConfigOverrides::default(),
    };
    let config = cli::resolve_config(kind, &args.overrides(), &file)?;
    let files = cli::run(&config)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Toy(a) => (ExperimentKind::ToyComparison, a),
        Command::SweepM(a) => (ExperimentKind::SweepIterations, a),
        Command::SweepDepth(a) => (ExperimentKind::SweepDepth, a),
        Command::Xor(a) => (ExperimentKind::XorCertify, a),
        Command::Comono(a) => (ExperimentKind::ComonotoneCertify, a),
        Command::Plateau(a) => (ExperimentKind::StumpPlateau, a),
        Command::Backtest(a) => (ExperimentKind::Backtest, a),
        Command::SynthPanel(a) => (ExperimentKind::SynthPanel, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
