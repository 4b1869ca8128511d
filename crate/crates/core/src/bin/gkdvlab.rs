use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gkdvlab::commands::{self, resolve_output};
use gkdvlab::config::load_config;
use gkdvlab::verify::{run_verify, Suite};
use gkdvlab::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "gkdvlab", version, about = "Pseudospectral gKdV simulator and scattering diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a config and write a run directory.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        /// Run directory; overrides the config. Relative paths live under the output root.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Replace an existing run in the target directory.
        #[arg(long)]
        force: bool,
    },
    /// Per-slice diagnostics CSV and run summary.
    Diagnose { dir: PathBuf },
    /// Scattering criteria report.
    Criteria {
        dir: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// One run per amplitude of the config's initial data.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        amplitudes: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a self-test suite: operators, conservation, strichartz, kappa or all.
    Verify { suite: String },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParams(_) | Error::InvalidGrid(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::BlowUp { .. } | Error::InvalidField(_) | Error::SymmetryViolation { .. } | Error::Resolution(_)
    )
}

fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, output, force } => {
            let cfg = load_config(&config).map_err(as_config_error)?;
            let dir = resolve_output(output.as_deref().unwrap_or(&cfg.output));
            let outcome = match commands::run_simulate(&cfg, &config_base(&config), &dir, force) {
                Ok(o) => o,
                Err(e) if is_numerical(&e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_NUMERICAL);
                }
                Err(e) => return Err(e),
            };
            println!("{}", outcome.dir.display());
            if outcome.blew_up() {
                eprintln!("run flagged as blowing up: {:?}", outcome.manifest.status);
                return Ok(EXIT_NUMERICAL);
            }
            Ok(0)
        }
        Command::Diagnose { dir } => {
            let summary = commands::run_diagnose(&dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(0)
        }
        Command::Criteria { dir, kappa } => {
            let report = commands::run_criteria(&dir, kappa)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
        Command::Sweep {
            config,
            amplitudes,
            output,
        } => {
            let cfg = load_config(&config).map_err(as_config_error)?;
            let dir = resolve_output(output.as_deref().unwrap_or(&cfg.output));
            let rows = commands::run_sweep(&cfg, &amplitudes, &config_base(&config), &dir)?;
            for r in &rows {
                let rep = &r.report;
                println!(
                    "amplitude {:<10} i {:<5} ii {:<5} iii {:<5} blowup {}",
                    r.amplitude, rep.verdict_i, rep.verdict_ii, rep.verdict_iii, rep.blowup_flag
                );
            }
            println!("{}", dir.join(gkdvlab::io::SWEEP_FILE).display());
            Ok(0)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = run_verify(suite)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(if failed == 0 { 0 } else { EXIT_VERIFY })
        }
    }
}

// unreadable or malformed config files are config errors, not I/O failures
fn as_config_error(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config {
            path: path.display().to_string(),
            message: source.to_string(),
        },
        other => other,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
