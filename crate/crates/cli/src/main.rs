//! `audit` — run the built-in golden cases or user scenario files and emit
//! reports.
//!
//! Exit codes are a stable contract: 0 all golden values pass, 1 a
//! computation or golden comparison failed, 2 usage/validation error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bayes_audit::scenario::{self, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "audit", about = "Bayesian reparameterization audits", version)]
struct Cli {
    /// Output format for reports
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiply every golden tolerance by this factor
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in golden case by id
    Reproduce { case_id: String },
    /// Run a scenario file (JSON, schema 1)
    Run { path: PathBuf },
    /// List the built-in golden cases
    List,
    /// Sweep a registered parameter of a case and emit CSV rows
    Profile {
        case_id: String,
        param: String,
        /// range as <lo>..<hi>
        range: String,
        steps: usize,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("AUDIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.command {
        Command::List => {
            for s in scenario::registry() {
                println!("{}", s.id);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce { case_id } => {
            let s = scenario::find(case_id)
                .ok_or_else(|| format!("unknown case '{case_id}'"))?;
            execute(cli, s)
        }
        Command::Run { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let s: Scenario = serde_json::from_str(&text).map_err(|e| {
                format!(
                    "{} is not a valid scenario (line {}, column {}): {e}",
                    path.display(),
                    e.line(),
                    e.column()
                )
            })?;
            execute(cli, s)
        }
        Command::Profile {
            case_id,
            param,
            range,
            steps,
        } => {
            let (lo, hi) = parse_range(range)?;
            let rows = scenario::profile_values(case_id, param, lo, hi, *steps)
                .map_err(|e| e.to_string())?;
            println!("param,value,err_est");
            for (x, v, e) in rows {
                println!("{x},{v},{e}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn execute(cli: &Cli, mut s: Scenario) -> Result<ExitCode, String> {
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(scale) = cli.tol_scale {
        for g in s.expected.iter_mut() {
            let t: f64 = g
                .tol
                .parse()
                .map_err(|_| format!("bad tolerance '{}'", g.tol))?;
            g.tol = format!("{}", t * scale);
        }
    }
    s.validate().map_err(|e| e.to_string())?;
    let report = match scenario::run(&s) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    match cli.format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => print!("{}", report.to_csv()),
    }
    Ok(if report.passed && report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn parse_range(range: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = range.split("..").collect();
    if parts.len() != 2 {
        return Err(format!("range must look like <lo>..<hi>, got '{range}'"));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| format!("bad range start '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| format!("bad range end '{}'", parts[1]))?;
    if !(lo < hi) && !(parts.len() == 2 && lo == hi) {
        return Err(format!("range start must not exceed end, got '{range}'"));
    }
    Ok((lo, hi))
}
