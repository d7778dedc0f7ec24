use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ibmflow::config::{parse_config_file, ConfigError, SimConfig};
use ibmflow::exec::{BackendKind, BackendSpec};
use ibmflow::forces::write_force_history;
use ibmflow::grid::MeshPreset;
use ibmflow::sim::{run_bench, run_scaling, run_simulation, run_validation, write_timing, RunError};

#[derive(Parser, Debug)]
#[command(name = "ibmflow", version, about = "Immersed boundary solver for a plunging elliptic foil")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured simulation and write its artifacts.
    Run,
    /// Run the plunging-foil scenario and check its invariants and periodicity.
    Validate,
    /// Time the desk mesh presets on the sequential and parallel backends.
    Scale,
    /// Per-region timing of the first steps (1000 unless --steps is given).
    BenchReport,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["sequential", "parallel"])]
    backend: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_config(common: &Common) -> Result<SimConfig, ConfigError> {
    let mut config = match &common.config {
        Some(path) => parse_config_file(path)?,
        None => SimConfig::default(),
    };
    if let Some(kind) = &common.backend {
        config.backend.kind = kind.parse::<BackendKind>().map_err(|e| ConfigError::Invalid {
            key: "backend.kind".into(),
            msg: e.to_string(),
        })?;
        if config.backend.kind == BackendKind::Sequential {
            config.backend.workers = 1;
        } else if common.workers.is_none() && config.backend.workers == 1 {
            config.backend.workers = default_workers();
        }
    }
    if let Some(w) = common.workers {
        config.backend.workers = w;
    }
    if let Some(n) = common.steps {
        config.time.n_steps = n;
    }
    if let Some(dir) = &common.out {
        config.output.dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(command: &Command, common: &Common) -> Result<ExitCode, RunError> {
    let mut config = load_config(common)?;
    match command {
        Command::Run => {
            let s = run_simulation(&config)?;
            println!(
                "{} steps in {:.2} s, artifacts in {}",
                s.steps,
                s.wall_s,
                s.out_dir.display()
            );
        }
        Command::Validate => {
            let report = run_validation(&config)?;
            let dir = &config.output.dir;
            create_dir(dir)?;
            let text = report.to_text();
            write_file(&dir.join("validation.txt"), &text)?;
            let path = dir.join("forces.csv");
            write_force_history(&report.forces, &path).map_err(|source| RunError::Io { path, source })?;
            print!("{text}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Scale => {
            let steps = common.steps.unwrap_or(200);
            let mut counts = vec![steps / 4, steps / 2, steps];
            counts.retain(|&n| n > 0);
            counts.dedup();
            let workers = if config.backend.kind == BackendKind::Parallel {
                config.backend.workers
            } else {
                common.workers.unwrap_or_else(default_workers)
            };
            let parallel = BackendSpec::parallel(workers).map_err(|e| ConfigError::Invalid {
                key: "backend.workers".into(),
                msg: e.to_string(),
            })?;
            let backends = [BackendSpec::sequential(), parallel];
            let report = run_scaling(&config, &MeshPreset::ALL, &counts, &backends);
            let dir = &config.output.dir;
            create_dir(dir)?;
            write_file(&dir.join("scaling.csv"), &report.to_csv())?;
            let tables = report.tables();
            write_file(&dir.join("scaling.txt"), &tables)?;
            print!("{tables}");
        }
        Command::BenchReport => {
            let steps = common.steps.unwrap_or(1000);
            config.time.n_steps = steps;
            let report = run_bench(&config, steps)?;
            let dir = &config.output.dir;
            create_dir(dir)?;
            write_timing(&report.timing, dir)?;
            let text = report.to_text();
            write_file(&dir.join("bench.txt"), &text)?;
            print!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command, &cli.common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
