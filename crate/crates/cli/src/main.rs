use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

mod commands;

/// Differential equations with piecewise constant argument of generalized type.
#[derive(Parser, Debug)]
#[command(name = "epcag", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate an initial value problem forward by the method of steps.
    Simulate(RunArgs),
    /// Compute the bounded (almost periodic) solution by Picard iteration.
    SolveAp(RunArgs),
    /// Evaluate the existence and stability conditions.
    Check(RunArgs),
    /// Perturbation experiment around the bounded solution.
    Stability(RunArgs),
    /// Almost-period search for an integer-indexed sequence.
    Sequence(RunArgs),
    /// Positive solutions of the logistic example.
    Logistic(RunArgs),
}

#[derive(clap::Args, Debug, Clone)]
struct RunArgs {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Output directory for CSV files and report.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    /// Core window on which solutions are reported.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    core: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::SolveAp(a) => ("solve-ap", a),
        Command::Check(a) => ("check", a),
        Command::Stability(a) => ("stability", a),
        Command::Sequence(a) => ("sequence", a),
        Command::Logistic(a) => ("logistic", a),
    };
    match run(name, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run(name: &str, args: &RunArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&args.problem).with_context(|| format!("reading {}", args.problem.display()))?;
    let mut file = match epcag::parse_problem(&text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("invalid problem file: {e}");
            return Ok(ExitCode::from(EXIT_VALIDATION));
        }
    };
    if let Err(e) = commands::apply_overrides(name, &mut file, &overrides(args)).and_then(|()| file.validate()) {
        eprintln!("invalid override: {e}");
        return Ok(ExitCode::from(EXIT_VALIDATION));
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcome = commands::dispatch(name, &file, &args.out);
    let report = match outcome {
        Ok(report) => report,
        Err(e) => match commands::failed_condition(&e) {
            None => {
                eprintln!("invalid input: {e}");
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
            Some(condition) => epcag::Report::new(name, file, serde_json::Value::Null).failed(condition, e.to_string()),
        },
    };
    write_report(&args.out, &report)?;
    match (&report.failed_condition, &report.message) {
        (Some(c), m) => {
            eprintln!("{name}: condition {c} failed{}", m.as_deref().map(|m| format!(": {m}")).unwrap_or_default());
            Ok(ExitCode::from(EXIT_NUMERICAL))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn overrides(args: &RunArgs) -> commands::Overrides {
    commands::Overrides {
        tol: args.tol,
        core: args.core.as_ref().map(|c| [c[0], c[1]]),
        t_end: args.t_end,
        seed: args.seed,
        trials: args.trials,
    }
}

fn write_report(out: &Path, report: &epcag::Report) -> anyhow::Result<()> {
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
