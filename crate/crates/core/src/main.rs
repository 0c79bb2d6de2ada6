use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attfdir::filters::FilterKind;
use attfdir::sim::{
    compare, compute_metrics, export_csv, format_metrics_table, resolve_scenario, run_scenario, MetricsOptions,
    RunMode, RunResult, ScenarioConfig,
};
use attfdir::Error;
use clap::{Args, Parser, Subcommand};

/// Attitude estimation and fault detection workbench.
///
/// A scenario is either a path to a TOML file or the name of a bundled
/// scenario (for example `paper_baseline_spike`).
#[derive(Parser)]
#[command(name = "attfdir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Truth trajectory and sensor measurements only.
    Simulate(RunArgs),
    /// Adds the configured filter, without fault handling.
    Estimate(RunArgs),
    /// Adds detection, isolation and recovery; prints one line per fault report.
    Fdir(RunArgs),
    /// Runs several filters on one scenario and prints a metrics table.
    Compare(CompareArgs),
    /// Lists the bundled scenarios.
    List,
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled scenario name.
    scenario: String,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the time step [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Override the end time [s].
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Suppress everything except errors.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// CSV output file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated filter list.
    #[arg(long, value_delimiter = ',', default_value = "ekf,ukf,pf")]
    filters: Vec<FilterKind>,
    /// Directory for one CSV per filter.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn load(common: &Common) -> attfdir::Result<ScenarioConfig> {
    let mut cfg = resolve_scenario(&common.scenario)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = common.t_end {
        cfg.t_end = t_end;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(result: &RunResult) {
    if result.filter.is_some() {
        let m = compute_metrics(result, &MetricsOptions::default());
        print!("{}", format_metrics_table(&[m]));
    } else {
        println!("{}: {} samples", result.scenario, result.len());
    }
}

fn run_single(args: &RunArgs, mode: RunMode) -> attfdir::Result<()> {
    let cfg = load(&args.common)?;
    let result = run_scenario(&cfg, mode)?;
    if let Some(path) = &args.output {
        export_csv(&result, path)?;
    }
    if args.common.quiet {
        return Ok(());
    }
    if mode == RunMode::Fdir {
        for report in result
            .estimates
            .iter()
            .filter_map(|e| e.report.as_ref())
            .filter(|r| r.detected || !r.isolated.is_empty())
        {
            println!("{report}");
        }
    }
    print_summary(&result);
    Ok(())
}

fn csv_path(dir: &Path, result: &RunResult) -> PathBuf {
    let filter = result.filter.map_or("none", FilterKind::name);
    dir.join(format!("{}_{filter}.csv", result.scenario))
}

fn run_compare(args: &CompareArgs) -> attfdir::Result<()> {
    let cfg = load(&args.common)?;
    if args.filters.is_empty() {
        return Err(Error::InvalidArgument("--filters is empty".into()));
    }
    let results = compare(&cfg, &args.filters, RunMode::Fdir)?;
    if let Some(dir) = &args.output {
        std::fs::create_dir_all(dir)?;
        for r in &results {
            export_csv(r, csv_path(dir, r))?;
        }
    }
    if !args.common.quiet {
        let opts = MetricsOptions::default();
        let rows: Vec<_> = results.iter().map(|r| compute_metrics(r, &opts)).collect();
        print!("{}", format_metrics_table(&rows));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            // Bad arguments are configuration errors; --help and --version are not.
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => run_single(a, RunMode::Simulate),
        Command::Estimate(a) => run_single(a, RunMode::Estimate),
        Command::Fdir(a) => run_single(a, RunMode::Fdir),
        Command::Compare(a) => run_compare(a),
        Command::List => {
            for name in attfdir::sim::bundled_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
