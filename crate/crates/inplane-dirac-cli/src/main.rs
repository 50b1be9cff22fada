use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use inplane_dirac_cli::config::{parse_config, Format, RunConfig};
use inplane_dirac_cli::run::run_scenario;
use inplane_dirac_cli::{emit, EXIT_INVARIANT, EXIT_USAGE, SEED_ENV};

#[derive(Parser)]
#[command(name = "inplane-dirac", version, about = "Run in-plane Dirac scenarios and emit result tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its table.
    Run {
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario file without running it.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn load(path: &PathBuf) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.seed = v.trim().parse().map_err(|_| format!("{SEED_ENV} must be a non-negative integer, got {v:?}"))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("ok: {} (seed {})", cfg.scenario.name(), cfg.seed);
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_USAGE, e),
        },
        Command::Run { config, jobs, format, out } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_USAGE, e),
            };
            if let Some(f) = format {
                cfg.format = match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                };
            }
            let target = out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
            let outcome = match run_scenario(&cfg, jobs as usize) {
                Ok(o) => o,
                Err(e) => return fail(EXIT_INVARIANT, e),
            };
            let text = match emit(&outcome.table, cfg.format) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_INVARIANT, e),
            };
            let written = match &target {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(text.as_bytes()).map_err(|e| format!("stdout: {e}"))
                }
            };
            if let Err(e) = written {
                return fail(EXIT_USAGE, e);
            }
            if !outcome.violations.is_empty() {
                for v in &outcome.violations {
                    eprintln!("invariant violated: {v}");
                }
                return ExitCode::from(EXIT_INVARIANT as u8);
            }
            ExitCode::SUCCESS
        }
    }
}
