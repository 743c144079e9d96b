//! Command-line front end for the fading-channel scheduling testbed.
//!
//! Subcommands: `gen` writes instance files from a generator spec, `run`
//! executes an experiment config, `sweep` varies a policy parameter, and
//! `oracle`/`validate` inspect single files. Exit codes: 0 success, 1 config
//! error, 2 validation violation, 3 oracle cap exceeded where skipping is
//! not allowed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use fadesched::{
    generate, run_experiment, sweep, validate_outcome, ExperimentConfig, GeneratorSpec,
    HarnessError, Instance, OracleError, Ratio, ScheduleOutcome, SweepConfig,
    DEFAULT_ORACLE_CAP,
};

#[derive(Parser)]
#[command(
    name = "fadesched",
    version,
    about = "Deadline packet scheduling over a fading channel: simulator, exact offline \
             optimum, and competitive-ratio reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance files from a family name or generator spec file
    Gen(GenArgs),
    /// Run the experiment described by a JSON config file
    Run(RunArgs),
    /// Evaluate one policy family across a range of parameter values
    Sweep(SweepArgs),
    /// Print the exact offline optimum of one instance file as JSON
    Oracle(OracleArgs),
    /// Check an instance file, optionally together with an outcome file
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// `ratio2`, `phi`, or a path to a generator spec JSON file
    /// (e.g. `{"family": "random", "count": 100, ...}`)
    spec: String,
    /// Directory for `<id>.json` files (families with a known optimal value
    /// also get `<id>.expected.json` sidecars)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON)
    config: PathBuf,
    /// Fail with exit code 3 if any instance is skipped by the oracle cap
    #[arg(long)]
    deny_skips: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (JSON)
    config: PathBuf,
    /// Fail with exit code 3 if any instance is skipped by the oracle cap
    #[arg(long)]
    deny_skips: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Instance file (JSON)
    instance: PathBuf,
    /// Largest instance (packet count) the exact search will accept
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    cap: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instance file (JSON)
    instance: PathBuf,
    /// Outcome file (JSON) to check against the instance
    #[arg(long)]
    outcome: Option<PathBuf>,
}

/// A failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn cap(message: impl Into<String>) -> Failure {
        Failure { code: 3, message: message.into() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Failure {
        let code = match &e {
            HarnessError::OutcomeInvalid { .. } => 2,
            HarnessError::Oracle(OracleError::CapExceeded { .. }) => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Gen(args) => gen_cmd(args),
        Command::Run(args) => run_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Oracle(args) => oracle_cmd(args),
        Command::Validate(args) => validate_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn gen_cmd(args: &GenArgs) -> Result<(), Failure> {
    let spec = match args.spec.as_str() {
        "ratio2" => GeneratorSpec::Ratio2,
        "phi" => GeneratorSpec::Phi,
        path => read_config(Path::new(path))?,
    };
    let generated = generate(&spec, args.seed)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::config(format!("{}: {e}", args.out.display())))?;
    let write = |path: PathBuf, text: String| -> Result<(), Failure> {
        fs::write(&path, text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    };
    for g in &generated {
        let body = serde_json::to_string_pretty(&g.instance)
            .map_err(|e| Failure::config(e.to_string()))?;
        write(args.out.join(format!("{}.json", g.id)), body + "\n")?;
        if let Some(value) = g.expected_optimal {
            let sidecar = serde_json::json!({ "expected_optimal": value });
            write(
                args.out.join(format!("{}.expected.json", g.id)),
                format!("{sidecar:#}\n"),
            )?;
        }
    }
    println!("wrote {} instance file(s) to {}", generated.len(), args.out.display());
    Ok(())
}

fn show_ratio(r: Option<Ratio>) -> String {
    match r {
        None => "-".into(),
        Some(r) if r.is_unbounded() => "inf".into(),
        Some(r) => format!("{:.6}", r.0),
    }
}

fn run_cmd(args: &RunArgs) -> Result<(), Failure> {
    let config: ExperimentConfig = read_config(&args.config)?;
    let report = run_experiment(&config)?;
    let skipped = report.rows.iter().filter(|r| r.skipped).count();
    println!("{} row(s), {} skipped", report.rows.len(), skipped);
    for s in &report.summary {
        println!(
            "{} [{}]: rows {}, skipped {}, max ratio {}, mean ratio {}",
            s.policy,
            s.mode,
            s.rows,
            s.skipped,
            show_ratio(s.max_ratio),
            show_ratio(s.mean_ratio),
        );
    }
    if let Some(path) = &config.csv_out {
        println!("csv report: {}", path.display());
    }
    if let Some(path) = &config.json_out {
        println!("json report: {}", path.display());
    }
    if args.deny_skips && skipped > 0 {
        return Err(Failure::cap(format!("{skipped} row(s) skipped by the oracle cap")));
    }
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> Result<(), Failure> {
    let config: SweepConfig = read_config(&args.config)?;
    let report = sweep(&config)?;
    let mut skipped_total = 0;
    for row in &report.rows {
        skipped_total += row.skipped;
        println!(
            "{}={}: max ratio {}, mean ratio {} (rows {}, skipped {})",
            report.parameter,
            row.value,
            show_ratio(row.max_ratio),
            show_ratio(row.mean_ratio),
            row.rows,
            row.skipped,
        );
    }
    if let Some(path) = &config.csv_out {
        println!("csv report: {}", path.display());
    }
    if let Some(path) = &config.json_out {
        println!("json report: {}", path.display());
    }
    if args.deny_skips && skipped_total > 0 {
        return Err(Failure::cap(format!("{skipped_total} row(s) skipped by the oracle cap")));
    }
    Ok(())
}

fn oracle_cmd(args: &OracleArgs) -> Result<(), Failure> {
    let instance: Instance = read_config(&args.instance)?;
    let outcome = fadesched::offline_optimal_with_cap(&instance, args.cap).map_err(|e| match e {
        OracleError::CapExceeded { .. } => Failure::cap(e.to_string()),
        other => Failure::config(other.to_string()),
    })?;
    let json =
        serde_json::to_string_pretty(&outcome).map_err(|e| Failure::config(e.to_string()))?;
    println!("{json}");
    Ok(())
}

fn validate_cmd(args: &ValidateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.instance)
        .map_err(|e| Failure::config(format!("{}: {e}", args.instance.display())))?;
    let instance: Instance = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("{}: {e}", args.instance.display())))?;
    match &args.outcome {
        None => {
            println!("ok: instance is well-formed");
            Ok(())
        }
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let outcome: ScheduleOutcome = serde_json::from_str(&text)
                .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
            let violations = validate_outcome(&instance, &outcome);
            if violations.is_empty() {
                println!("ok: outcome is a valid schedule for the instance");
                Ok(())
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                Err(Failure::validation(format!("{} violation(s)", violations.len())))
            }
        }
    }
}
