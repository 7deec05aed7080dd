mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "qeopt", version, about = "Warm-started optimisation from emulated QAOA samples")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (a directory for `bench` and `build-tables`); standard
    /// output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

/// `csv` selects the line-oriented text formats, `json` the structured ones.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Maxcut,
    Mis,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark graph or its QUBO.
    Gen(commands::GenArgs),
    /// Predict QAOA angles for a graph without optimisation.
    Predict(commands::PredictArgs),
    /// Emulate QAOA and sample bit-strings.
    Emulate(commands::EmulateArgs),
    /// Lay out and route one cost layer onto a hardware graph.
    Route(commands::RouteArgs),
    /// Filter or correct a sample set.
    Filter(commands::FilterArgs),
    /// Multistart tabu search from random or supplied starts.
    Solve(commands::SolveArgs),
    /// Partition, solve each block and recombine.
    SolveLarge(commands::SolveLargeArgs),
    /// Run a cold-versus-warm experiment.
    Bench(commands::BenchArgs),
    /// Rebuild the angle lookup tables.
    BuildTables(commands::BuildTablesArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: jobs: {e}");
            return ExitCode::from(2);
        }
    }
    let c = &cli.common;
    let res = match &cli.cmd {
        Cmd::Gen(a) => commands::gen(a, c),
        Cmd::Predict(a) => commands::predict(a, c),
        Cmd::Emulate(a) => commands::emulate(a, c),
        Cmd::Route(a) => commands::route(a, c),
        Cmd::Filter(a) => commands::filter(a, c),
        Cmd::Solve(a) => commands::solve(a, c),
        Cmd::SolveLarge(a) => commands::solve_large(a, c),
        Cmd::Bench(a) => commands::bench(a, c),
        Cmd::BuildTables(a) => commands::build_tables(a, c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {:#}", e.stage, e.source);
            ExitCode::from(2)
        }
    }
}
