use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use goodhart_core::diagnostics::{self, DiagnosticsError};
use goodhart_core::dsl::{self, ParseError};
use goodhart_core::scenarios::{self, ScenarioError};
use goodhart_core::ScenarioDoc;

mod output;

#[derive(Parser)]
#[command(
    name = "goodhart",
    version,
    about = "Simulate Goodhart effects in structural causal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print its effect report
    Run {
        path: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Re-run the final threshold stage over an evenly spaced range of thresholds
    Sweep {
        path: PathBuf,
        #[arg(allow_negative_numbers = true)]
        lo: f64,
        #[arg(allow_negative_numbers = true)]
        hi: f64,
        steps: usize,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Print a canonical scenario, optionally with key=value parameter overrides
    Canon { name: String, overrides: Vec<String> },
    /// Check a scenario file and list every problem
    Validate { path: PathBuf },
}

#[derive(Args)]
struct RunConfig {
    /// Number of sampled worlds
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to json for `run` and csv for `sweep`
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Usage(String),
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { path, config } => cmd_run(&path, &config),
        Command::Sweep {
            path,
            lo,
            hi,
            steps,
            config,
        } => cmd_sweep(&path, lo, hi, steps, &config),
        Command::Canon { name, overrides } => cmd_canon(&name, &overrides),
        Command::Validate { path } => cmd_validate(&path),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn describe(path: &Path, e: &ParseError) -> String {
    let caret = " ".repeat(e.column.saturating_sub(1));
    format!(
        "{}:{}:{}: {}\n  {}\n  {caret}^",
        path.display(),
        e.line,
        e.column,
        e.message,
        e.snippet
    )
}

fn load(path: &Path) -> Result<ScenarioDoc, Failure> {
    let text = read(path)?;
    dsl::parse_named(&text, &source_name(path)).map_err(|e| Failure::Invalid(describe(path, &e)))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
        }
    }
}

fn samples(config: &RunConfig) -> Result<usize, Failure> {
    usize::try_from(config.samples)
        .map_err(|_| Failure::Usage(format!("--samples {} is too large", config.samples)))
}

fn runtime(e: DiagnosticsError) -> Failure {
    Failure::Runtime(e.to_string())
}

fn cmd_run(path: &Path, config: &RunConfig) -> Result<(), Failure> {
    let doc = load(path)?;
    let n = samples(config)?;
    let report = diagnostics::run_report(&doc, n, config.seed).map_err(runtime)?;
    let text = match config.format.unwrap_or(Format::Json) {
        Format::Json => output::report_json(&report),
        Format::Csv => output::report_csv(&report),
    };
    emit(config.out.as_deref(), &text)
}

fn thresholds(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Failure::Usage("sweep bounds must be finite".to_string()));
    }
    match steps {
        0 => Err(Failure::Usage("steps must be at least 1".to_string())),
        1 if lo == hi => Ok(vec![lo]),
        1 => Err(Failure::Usage("a single step needs lo equal to hi".to_string())),
        _ if lo >= hi => Err(Failure::Usage(format!(
            "invalid range: lo {lo} must be below hi {hi}"
        ))),
        _ => {
            let last = (steps - 1) as f64;
            let mut cs: Vec<f64> = (0..steps).map(|i| lo + (hi - lo) * i as f64 / last).collect();
            cs[steps - 1] = hi;
            if cs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Failure::Usage(
                    "range too narrow for the number of steps".to_string(),
                ));
            }
            Ok(cs)
        }
    }
}

fn cmd_sweep(path: &Path, lo: f64, hi: f64, steps: usize, config: &RunConfig) -> Result<(), Failure> {
    let cs = thresholds(lo, hi, steps)?;
    let doc = load(path)?;
    let n = samples(config)?;
    let curve = diagnostics::sweep(&doc, &cs, n, config.seed).map_err(|e| match e {
        DiagnosticsError::InvalidSweep(_) => Failure::Invalid(format!("{}: {e}", path.display())),
        other => runtime(other),
    })?;
    for c in &curve.omitted {
        eprintln!("warning: no rows survive at c = {c}; point omitted");
    }
    let text = match config.format.unwrap_or(Format::Csv) {
        Format::Json => output::sweep_json(&doc.source_name, n, config.seed, &curve),
        Format::Csv => output::sweep_csv(&curve),
    };
    emit(config.out.as_deref(), &text)
}

fn cmd_canon(name: &str, overrides: &[String]) -> Result<(), Failure> {
    let pairs = overrides
        .iter()
        .map(|o| match o.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(Failure::Usage(format!(
                "override '{o}' is not of the form key=value"
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let doc = scenarios::canonical(name, &pairs)?;
    emit(None, &dsl::render(&doc))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let errors = dsl::check_all(&text);
    if errors.is_empty() {
        return emit(None, "ok\n");
    }
    let listing: Vec<String> = errors.iter().map(|e| describe(path, e)).collect();
    Err(Failure::Invalid(format!(
        "{} problem{} found\n{}",
        errors.len(),
        if errors.len() == 1 { "" } else { "s" },
        listing.join("\n")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_hit_both_ends() {
        let cs = thresholds(0.0, 2.0, 5).ok().unwrap();
        assert_eq!(cs, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let cs = thresholds(-1.0, 0.3, 7).ok().unwrap();
        assert_eq!(*cs.last().unwrap(), 0.3);
    }

    #[test]
    fn bad_ranges() {
        assert!(thresholds(1.0, 0.0, 3).is_err());
        assert!(thresholds(0.0, 1.0, 0).is_err());
        assert!(thresholds(0.0, 1.0, 1).is_err());
        assert_eq!(thresholds(0.5, 0.5, 1).ok(), Some(vec![0.5]));
    }

    #[test]
    fn stem_names_scenario() {
        assert_eq!(source_name(Path::new("dir/campbell.ghl")), "campbell");
    }
}
