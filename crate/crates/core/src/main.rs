use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use maxcon::bench::{self, ExperimentSpec};
use maxcon::boolean::{influence_exact, influence_sampled, SamplingOptions};
use maxcon::config::{load_layer, resolve_config, ConfigLayer, RunConfig};
use maxcon::feasibility::FeasibilityOracle;
use maxcon::maxcon::{mbf_maxcon_variant, MaxConResult, Variant};
use maxcon::model::{generate_line2d, generate_linear, Corruption, Dataset};
use maxcon::{Error, Result, SubsetMask};

#[derive(Parser)]
#[command(name = "maxcon", version, about = "Maximum-consensus robust fitting with influence-guided greedy search")]
struct Cli {
    /// JSON file with default settings (eps, m, q, seed, variant, local_expansion, verbosity).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a maximum consensus set.
    Fit(FitArgs),
    /// Estimate per-point influences of the feasibility function.
    Influence(InfluenceArgs),
    /// Run an experiment spec and write its result table.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Aggregate result tables in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Aggregate CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write affine trends of cost against outlier count.
        #[arg(long)]
        trends: Option<PathBuf>,
    },
    /// Write a synthetic labelled dataset.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Skip local expansion.
    #[arg(long)]
    no_expand: bool,
    /// JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct InfluenceArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Enumerate all 2^n vertices instead of sampling.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Line2d,
    Linear,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Model dimension (linear family only).
    #[arg(long, default_value_t = 8)]
    p: usize,
    /// Outlier count (linear family).
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    /// Outlier share (line2d family).
    #[arg(long, default_value_t = 0.25)]
    outlier_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    inlier_noise: f64,
    #[arg(long, default_value_t = 0.1)]
    outlier_inner: f64,
    #[arg(long, default_value_t = 5.0)]
    outlier_outer: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    version: &'a str,
    config: &'a RunConfig,
    result: &'a MaxConResult,
}

#[derive(Serialize)]
struct InfluenceOutput<'a> {
    version: &'a str,
    config: &'a RunConfig,
    influences: &'a maxcon::boolean::InfluenceVector,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_argument_error() { 2 } else { 1 })
        }
    }
}

fn resolve(cli_config: Option<&Path>, verbose: u8, args: &SolverArgs, variant: Option<Variant>, no_expand: bool) -> Result<RunConfig> {
    let layer = ConfigLayer {
        eps: args.eps,
        m: args.m,
        q: args.q,
        seed: args.seed,
        variant,
        local_expansion: no_expand.then_some(false),
        verbosity: (verbose > 0).then_some(verbose),
    };
    let env = ConfigLayer::from_env(std::env::vars())?;
    let file = cli_config.map(load_layer).transpose()?;
    resolve_config(layer, env, file)
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Fit(args) => {
            let cfg = resolve(config_path, cli.verbose, &args.solver, args.variant, args.no_expand)?;
            let data = Dataset::load(&args.solver.data)?;
            let result = mbf_maxcon_variant(&data, &cfg.maxcon_config()?)?;
            log::info!("consensus {} of {} points", result.consensus_size(), data.n());
            let output = FitOutput {
                version: bench::VERSION,
                config: &cfg,
                result: &result,
            };
            emit(args.out.as_deref(), serde_json::to_string_pretty(&output)?.as_bytes())
        }
        Command::Influence(args) => {
            let cfg = resolve(config_path, cli.verbose, &args.solver, None, false)?;
            let data = Dataset::load(&args.solver.data)?;
            let oracle = FeasibilityOracle::new(&data, cfg.tolerance()?);
            let influences = if args.exact {
                influence_exact(&oracle)?
            } else {
                let q = cfg.maxcon_config()?.resolved_q(&data);
                let all: Vec<usize> = (0..data.n()).collect();
                influence_sampled(&oracle, &SubsetMask::full(data.n()), &all, SamplingOptions::new(cfg.m, q, cfg.seed))?
            };
            let mut buf = Vec::new();
            match args.format {
                Format::Csv => influences.write_csv(&mut buf)?,
                Format::Json => {
                    let output = InfluenceOutput {
                        version: bench::VERSION,
                        config: &cfg,
                        influences: &influences,
                    };
                    buf = serde_json::to_vec_pretty(&output)?;
                }
            }
            emit(args.out.as_deref(), &buf)
        }
        Command::Experiment { spec, out_dir } => {
            let spec = ExperimentSpec::load(&spec)?;
            let path = bench::run_to_dir(&spec, &out_dir)?;
            let spec_path = path.with_extension("spec.json");
            std::fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Report { input, out, trends } => {
            let tables = bench::read_dir(&input)?;
            if tables.influence.is_empty() && tables.solver.is_empty() {
                return Err(Error::InvalidArgument(format!("no result tables in {}", input.display())));
            }
            let mut buf = Vec::new();
            bench::write_rows(&mut buf, &bench::aggregate(&tables))?;
            emit(out.as_deref(), &buf)?;
            if let Some(path) = trends {
                bench::write_rows(std::fs::File::create(path)?, &bench::trends(&tables))?;
            }
            Ok(())
        }
        Command::Generate(args) => {
            let corruption = Corruption {
                inlier_noise: args.inlier_noise,
                outlier_range: (args.outlier_inner, args.outlier_outer),
            };
            let synth = match args.family {
                Family::Line2d => generate_line2d(args.n, args.outlier_fraction, corruption, args.seed)?,
                Family::Linear => generate_linear(args.n, args.p, args.outliers, corruption, args.seed)?,
            };
            synth.dataset.save(&args.out)
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            if !bytes.ends_with(b"\n") {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
