//! `alphacomb`: optimal alpha weights by cross-sectional regression.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "alphacomb", version, about = "Combine many alphas into one portfolio of alphas")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Largest N for which O(N^2) verification paths may run.
    #[arg(long, global = true, env = "ALPHACOMB_DENSE_CAP", default_value_t = alphacomb::DenseCap::DEFAULT,
          value_parser = parse_cap)]
    dense_cap: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute weights for a returns panel and expected returns.
    Combine(CombineArgs),
    /// Compare the fast paths against dense covariance inverses on synthetic data.
    OracleCheck(OracleArgs),
    /// Time `combine` over growing N.
    Bench(BenchArgs),
    /// Write a synthetic returns panel, expected returns and its generating model.
    Gen(GenArgs),
    /// Regress off-diagonal sample correlations on a style factor.
    Style(StyleArgs),
}

#[derive(Args, Debug)]
struct CombineArgs {
    /// CSV `alpha_id,<t_1>,...,<t_{M+1}>`, most recent observation first.
    #[arg(long)]
    returns: PathBuf,
    /// CSV `alpha_id,expected_return`.
    #[arg(long)]
    expected: PathBuf,
    /// Output CSV `alpha_id,weight`.
    #[arg(long)]
    out: PathBuf,
    /// Regress on all M normalized return columns instead of removing the
    /// cross-sectional mode first.
    #[arg(long)]
    keep_overall_mode: bool,
    /// Long-format positions `alpha_id,instrument_id,time,position`; turned
    /// into average absolute exposures per instrument.
    #[arg(long)]
    loadings: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LoadingsMode::Replace, requires = "loadings")]
    loadings_mode: LoadingsMode,
    /// Overall scale of the position loadings.
    #[arg(long, default_value_t = 1.0, requires = "loadings")]
    loadings_scale: f64,
    /// CSV `alpha_id,specific_risk` used instead of sample volatilities.
    #[arg(long, conflicts_with = "pc_specific")]
    specific_risks: Option<PathBuf>,
    /// Specific risks from the principal components above this K.
    #[arg(long)]
    pc_specific: Option<usize>,
    /// Shrinkage constant for `--pc-specific`.
    #[arg(long, default_value_t = 1.0, requires = "pc_specific")]
    zeta: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum LoadingsMode {
    /// Use the position loadings in place of the return columns.
    Replace,
    /// Append them to the return columns, dropping dependent columns.
    Union,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Alphas in the factor-model identity check.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// M; panels have M + 1 observations.
    #[arg(long, default_value_t = 60)]
    m: usize,
    /// Factors in the generating model.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Panel sizes for the shrinkage sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![500, 2000])]
    trend: Vec<usize>,
    /// Shrinkage constants for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
    zeta: Vec<f64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![100_000, 200_000, 400_000, 800_000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 252)]
    m: usize,
    /// Also time these M values at the first N.
    #[arg(long, value_delimiter = ',')]
    vary_m: Vec<usize>,
    /// Runs per point; the fastest counts.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// M; the panel has M + 1 observations.
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    rho_min: f64,
    #[arg(long, default_value_t = 0.3)]
    rho_max: f64,
    #[arg(long, default_value_t = 0.5)]
    vol_min: f64,
    #[arg(long, default_value_t = 2.0)]
    vol_max: f64,
    /// Directory for `returns.csv`, `expected.csv` and `truth.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum StyleFactor {
    /// Log of sample volatility.
    Volatility,
    /// Log of cumulative return over the window; must be positive.
    Momentum,
}

#[derive(Args, Debug)]
struct StyleArgs {
    #[arg(long)]
    returns: PathBuf,
    #[arg(long, value_enum, default_value_t = StyleFactor::Volatility)]
    factor: StyleFactor,
    /// Regression table CSV.
    #[arg(long, default_value = "style_report.csv")]
    out: PathBuf,
    /// Scatter columns `w_a,psi_demeaned` CSV.
    #[arg(long, default_value = "style_figure.csv")]
    figure: PathBuf,
}

fn parse_cap(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(c) if c >= 2 => Ok(c),
        Ok(_) => Err("must be at least 2".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cap = alphacomb::DenseCap(cli.dense_cap);
    let result = match &cli.command {
        Command::Combine(a) => commands::combine(a),
        Command::OracleCheck(a) => commands::oracle_check(a, cli.seed, cap),
        Command::Bench(a) => commands::bench(a, cli.seed),
        Command::Gen(a) => commands::gen(a, cli.seed),
        Command::Style(a) => commands::style(a, cap),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
