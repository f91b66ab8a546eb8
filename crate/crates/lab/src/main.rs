use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use maser_lab::config::{parse_document, Document, Mode};
use maser_lab::{exit, output, run, scenarios, ConfigError};

#[derive(Parser)]
#[command(
    name = "maser",
    version,
    about = "Micro- and macroscopic dynamics of a periodically pumped maser"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a configuration file and list every violation.
    Validate { config: PathBuf },
    /// Shipped acceptance scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
    Run {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(clap::Args)]
struct RunOpts {
    /// Override run.mode (micro, macro, compare, stochastic, sweep).
    #[arg(long)]
    mode: Option<String>,
    /// CSV output path; the JSON sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threads for sweep points and stochastic realizations.
    #[arg(long)]
    workers: Option<usize>,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Machine-readable error record on stderr, followed by the exit status.
fn fail(code: i32, kind: &str, messages: Vec<String>) -> ExitCode {
    let record = json!({ "error": kind, "exit_code": code, "messages": messages });
    eprintln!("{record}");
    ExitCode::from(code as u8)
}

fn config_failure(e: &ConfigError) -> ExitCode {
    fail(exit::CONFIG, "config", e.violations())
}

fn load(text: &str, opts: &RunOpts) -> Result<Document, ConfigError> {
    let mut doc = parse_document(text)?;
    if let Some(mode) = &opts.mode {
        doc.run.mode = Mode::parse(mode)
            .ok_or_else(|| ConfigError::Invalid(vec![format!("unknown mode `{mode}`")]))?;
    }
    if let Some(seed) = opts.seed {
        doc.run.seed = seed;
    }
    Ok(doc)
}

fn execute(text: &str, opts: &RunOpts) -> ExitCode {
    let doc = match load(text, opts) {
        Ok(d) => d,
        Err(e) => return config_failure(&e),
    };
    let points = match doc.points() {
        Ok(p) => p,
        Err(e) => return config_failure(&e),
    };
    let workers = opts
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = match run(&doc, &points, workers) {
        Ok(r) => r,
        Err(e) => return fail(exit::NUMERICAL, "numerical", vec![e.to_string()]),
    };

    let out = opts.out.clone().or_else(|| doc.output.path.clone());
    let written = match &out {
        Some(path) => output::write_report(&report, path),
        None => output::write_csv(
            io::stdout().lock(),
            &report.rows,
            report.has_deviation_column,
        ),
    };
    if let Err(e) = written {
        return fail(exit::IO, "io", vec![e.to_string()]);
    }
    if out.is_none() {
        match serde_json::to_string(&report) {
            Ok(json) => eprintln!("{json}"),
            Err(e) => return fail(exit::IO, "io", vec![e.to_string()]),
        }
    }

    if !report.gates_passed() {
        let failed = report
            .points
            .iter()
            .filter(|p| p.gates_enabled)
            .flat_map(|p| {
                p.gates.iter().filter(|g| !g.passed).map(move |g| {
                    format!(
                        "{}{}: {:e} against limit {:e}",
                        p.label_prefix(),
                        g.name,
                        g.value,
                        g.limit
                    )
                })
            })
            .collect();
        return fail(exit::GATE, "gate", failed);
    }
    ExitCode::SUCCESS
}

trait LabelPrefix {
    fn label_prefix(&self) -> String;
}

impl LabelPrefix for maser_lab::run::PointReport {
    fn label_prefix(&self) -> String {
        if self.label.is_empty() {
            String::new()
        } else {
            format!("[{}] ", self.label)
        }
    }
}

fn read(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path)
        .map_err(|e| fail(exit::IO, "io", vec![format!("{}: {e}", path.display())]))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, opts } => match read(&config) {
            Ok(text) => execute(&text, &opts),
            Err(code) => code,
        },
        Command::Validate { config } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            match maser_lab::parse_config(&text) {
                Ok((_, points)) => {
                    println!("ok: {} run point(s)", points.len());
                    ExitCode::SUCCESS
                }
                Err(e) => config_failure(&e),
            }
        }
        Command::Scenarios {
            action: ScenarioAction::List,
        } => {
            for s in scenarios::SCENARIOS {
                println!("{:<26} {}", s.name, s.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Scenarios {
            action: ScenarioAction::Run { name, opts },
        } => match scenarios::find(&name) {
            Some(s) => execute(s.config, &opts),
            None => fail(
                exit::CONFIG,
                "config",
                vec![format!("unknown scenario `{name}`")],
            ),
        },
    }
}
