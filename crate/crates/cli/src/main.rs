//! `fracprony`: command-line harness for the Prony-series studies.

mod commands;
mod config;
mod output;

use anyhow::Result;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fracprony", version, about = "Fractional-derivative studies with recursive Prony series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (written atomically); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Progress on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Fit one Prony series and write it as JSON.
    Optimize(OptimizeArgs),
    /// Fit a grid of α and N and write the parameter table as JSON.
    Table(TableArgs),
    /// Polynomial refinement study (MP, GL and Prony errors in L²).
    Poly(PolyArgs),
    /// Fractional diffusion convergence study in time or space.
    Fde(FdeArgs),
    /// Liver rheometer benchmark: rim stresses, torque and normal force.
    Liver(LiverArgs),
    /// Randomized energy-stability sweep; exits nonzero on any violation.
    Stability(StabilityArgs),
    /// Timing and operation-count comparisons.
    Bench(BenchArgs),
}

/// Accepts decimals or fractions such as `2/3`.
pub fn real(s: &str) -> Result<f64, String> {
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    match s.split_once('/') {
        Some((n, d)) => Ok(parse(n)? / parse(d)?),
        None => parse(s),
    }
}

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = real, default_value = "0.5")]
    pub alpha: f64,
    #[arg(long, default_value_t = 9)]
    pub terms: usize,
    /// Harmonic count M; 100·N when absent.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    #[command(flatten)]
    pub common: Common,
    /// Increasing α grid; 0.05, 0.10, …, 0.95 when absent.
    #[arg(long, value_parser = real, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub n_min: usize,
    #[arg(long, default_value_t = 12)]
    pub n_max: usize,
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
}

#[derive(Args, Debug, Clone)]
pub struct PolyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = real, value_delimiter = ',', default_value = "0.1,0.4,0.8")]
    pub alphas: Vec<f64>,
    #[arg(long, value_parser = real, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")]
    pub dts: Vec<f64>,
    /// History methods: mp, mp-lagged, gl, diethelm, gao.
    #[arg(long, value_delimiter = ',', default_value = "mp-lagged,gl")]
    pub history: Vec<String>,
    /// History methods are skipped below this step.
    #[arg(long, value_parser = real, default_value = "1e-4")]
    pub history_min_dt: f64,
    #[arg(long, value_delimiter = ',', default_value = "3,6,9,12")]
    pub terms: Vec<usize>,
    /// Parameter table JSON for the Prony rows; fitted on the fly when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Fit window as a multiple of the 0.9 s study window.
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Temporal,
    Spatial,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormArg {
    Nodal,
    L2,
}

#[derive(Args, Debug, Clone)]
pub struct FdeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "temporal")]
    pub study: Study,
    #[arg(long, value_parser = real, value_delimiter = ',', default_value = "1/2,2/3")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,6,9,12")]
    pub terms: Vec<usize>,
    /// Prony fit window as a multiple of the unit time domain.
    #[arg(long, default_value_t = 100.0)]
    pub scale: f64,
    /// Refined counts (time steps or elements); the study's ladder when absent.
    #[arg(long, value_delimiter = ',')]
    pub refinements: Vec<usize>,
    /// Count on the fixed axis; 20000 when absent.
    #[arg(long)]
    pub fixed: Option<usize>,
    /// Full-length Gao column in the spatial study (minutes).
    #[arg(long)]
    pub long: bool,
    /// Nodal max for time refinement and L² for space refinement when absent.
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    /// Skip the Gao column.
    #[arg(long)]
    pub no_gao: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineArg {
    Prony,
    Gl,
    Mp,
    Elastic,
}

#[derive(Args, Debug, Clone)]
pub struct LiverArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "prony")]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 9)]
    pub terms: usize,
    #[arg(long, value_parser = real, default_value = "1e-3")]
    pub dt: f64,
    #[arg(long, value_parser = real, default_value = "2")]
    pub horizon: f64,
    /// Radial Gauss points for the face integrals.
    #[arg(long, default_value_t = 8)]
    pub quad: usize,
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
    #[arg(long, value_parser = real, default_value = "0.2")]
    pub alpha: f64,
    /// Parameter table JSON; fitted on the fly when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 32)]
    pub nx: usize,
    #[arg(long, default_value_t = 5)]
    pub stiff_probes: usize,
    /// Parameter table JSON covering N = 3..9; built when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Midpoint vs Prony wall time on the polynomial study.
    PolyTiming,
    /// Multiply-add counts under step doubling.
    Ops,
    /// Liver rim-point stress history per engine and step.
    Liver,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "poly-timing")]
    pub mode: BenchMode,
    /// Steps to time; per-mode defaults when absent.
    #[arg(long, value_parser = real, value_delimiter = ',')]
    pub dts: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,6,9,12")]
    pub terms: Vec<usize>,
    #[arg(long, value_parser = real, default_value = "0.4")]
    pub alpha: f64,
}

fn common(cmd: &Cmd) -> &Common {
    match cmd {
        Cmd::Optimize(a) => &a.common,
        Cmd::Table(a) => &a.common,
        Cmd::Poly(a) => &a.common,
        Cmd::Fde(a) => &a.common,
        Cmd::Liver(a) => &a.common,
        Cmd::Stability(a) => &a.common,
        Cmd::Bench(a) => &a.common,
    }
}

fn parse_cli() -> Result<Cli> {
    let argv: Vec<String> = std::env::args().collect();
    let root = Cli::command();
    let first = root.clone().get_matches_from(&argv);
    let cli = Cli::from_arg_matches(&first).map_err(|e| e.exit()).unwrap();
    let Some(path) = common(&cli.command).config.clone() else {
        return Ok(cli);
    };
    let extra = config::overrides(&path, &root, &first)?;
    let merged = root.get_matches_from(argv.into_iter().chain(extra));
    Ok(Cli::from_arg_matches(&merged).map_err(|e| e.exit()).unwrap())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let run = || -> Result<ExitCode> {
        let cli = parse_cli()?;
        configure_threads()?;
        commands::run(cli.command)
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
