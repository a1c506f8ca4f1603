use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaugetherm_cli::error::{CliError, CliResult};
use gaugetherm_cli::run::{pretty, run_scenario, write_outputs};
use gaugetherm_cli::{load_config, sweep, validate};

#[derive(Parser)]
#[command(name = "gaugetherm", version, about = "Gauge-resolved thermodynamics of open quantum systems")]
struct Cli {
    /// Worker threads for gauges and sweep points.
    #[arg(long, global = true, env = "GAUGETHERM_JOBS")]
    jobs: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Base directory for relative output paths; defaults to the config's directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write one CSV per gauge plus a summary.
    Simulate { config: PathBuf },
    /// Run the scenario once per value of its sweep section.
    Sweep { config: PathBuf },
    /// Check a config without integrating it.
    Validate { config: PathBuf },
}

fn base_dir(cli: &Cli, config: &Path) -> PathBuf {
    cli.output_dir.clone().unwrap_or_else(|| {
        config
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    })
}

fn emit(cli: &Cli, text: &str) {
    if !cli.quiet {
        print!("{text}");
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::schema("--jobs", e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate { config } => {
            let (_, cfg) = load_config(config)?;
            if cfg.sweep.is_some() {
                log::warn!("ignoring the sweep section; use the sweep command to run it");
            }
            let out = run_scenario(&cfg)?;
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("gaugetherm");
            let summary = write_outputs(&cfg, &out, &base_dir(cli, config), stem)?;
            emit(cli, &pretty(&summary));
        }
        Command::Sweep { config } => {
            let (raw, cfg) = load_config(config)?;
            let result = sweep::run_sweep(&raw)?;
            let text = pretty(&result);
            match &cfg.outputs.summary_path {
                Some(p) => {
                    let path = base_dir(cli, config).join(p);
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        std::fs::create_dir_all(dir)
                            .map_err(|e| CliError::io(dir.display().to_string(), e))?;
                    }
                    std::fs::write(&path, &text)
                        .map_err(|e| CliError::io(path.display().to_string(), e))?;
                }
                None => emit(cli, &text),
            }
        }
        Command::Validate { config } => {
            let (_, cfg) = load_config(config)?;
            emit(cli, &pretty(&validate(&cfg)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
