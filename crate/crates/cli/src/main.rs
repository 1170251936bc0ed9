mod config;
mod error;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use behex_core::checks::{run_suite, Suite};
use behex_core::sim::{run_episode, run_sweep};
use behex_core::world::{generate_map, MapKind};
use clap::{Parser, Subcommand};
use log::info;

use crate::config::RunConfig;
use crate::error::CliError;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "behex", version, about = "Deterministic multi-robot exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one exploration episode and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a map snapshot every N ticks; overrides `output.snapshot_every`.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run the factorial sweep from the config's `[sweep]` section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run a fixed-seed certificate suite: entropy, allocation, dro, lemma, prop or all.
    Check { suite: String },
    /// Generate a ground-truth map in OGRID format.
    Mapgen {
        /// open, rooms or corridors.
        #[arg(long)]
        kind: String,
        /// `WxH` in cells, or a single side length.
        #[arg(long)]
        size: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_logging(filter: &str) {
    let env = env_logger::Env::default().default_filter_or(filter);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn cmd_run(config: &Path, out: Option<PathBuf>, snapshot_every: Option<usize>) -> Result<u8, CliError> {
    let mut cfg = RunConfig::load(config)?;
    init_logging(&cfg.output.log);
    if let Some(k) = snapshot_every {
        cfg.output.snapshot_every = k;
    }
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let sim = cfg.sim();
    let result = run_episode(&sim)?;
    output::write_episode(&dir, &sim, &result)?;
    let m = &result.metrics;
    println!(
        "{:?} after {} ticks: entropy {:.4} -> {:.4}, path {:.3}; artifacts in {}",
        m.termination,
        m.iterations,
        m.initial_entropy,
        m.final_entropy,
        m.total_path,
        dir.display()
    );
    Ok(if m.completed { EXIT_OK } else { EXIT_INCOMPLETE })
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, jobs: usize) -> Result<u8, CliError> {
    let cfg = RunConfig::load(config)?;
    init_logging(&cfg.output.log);
    let spec = cfg.sweep_spec().ok_or_else(|| CliError::Config {
        path: config.to_path_buf(),
        msg: "missing [sweep] section".into(),
    })?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    output::create_dir(&dir)?;
    let rows = run_sweep(&cfg.sim(), &spec, jobs)?;
    let path = dir.join("dataset.csv");
    output::write_dataset(&path, &rows)?;
    info!("{} episodes written to {}", rows.len(), path.display());
    let mut stdout = std::io::stdout().lock();
    output::print_summary(&mut stdout, &output::summarize(&rows))
        .and_then(|_| stdout.flush())
        .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
    Ok(if rows.iter().all(|r| r.completed) { EXIT_OK } else { EXIT_INCOMPLETE })
}

fn cmd_check(suite: &str) -> Result<u8, CliError> {
    init_logging("warn");
    let suites: Vec<Suite> = if suite.eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(|e: behex_core::DomainError| CliError::Usage(e.0))?]
    };
    let mut failed = false;
    for s in suites {
        let r = run_suite(s);
        println!("{s}: {} passed, {} failed", r.passed, r.failed);
        for note in &r.notes {
            println!("  {note}");
        }
        for case in &r.failures {
            println!("  FAIL {case}");
        }
        failed |= !r.ok();
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("size must be WxH or N, got `{s}`"));
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn cmd_mapgen(kind: &str, size: &str, seed: u64, resolution: f64, out: &Path) -> Result<u8, CliError> {
    init_logging("warn");
    let kind: MapKind = kind.parse().map_err(CliError::Usage)?;
    let (w, h) = parse_size(size)?;
    let grid = generate_map(kind, w, h, resolution, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        output::create_dir(dir)?;
    }
    grid.save(out)?;
    println!("{kind} {w}x{h} map written to {}", out.display());
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out, snapshot_every } => cmd_run(&config, out, snapshot_every),
        Command::Sweep { config, out, jobs } => cmd_sweep(&config, out, jobs),
        Command::Check { suite } => cmd_check(&suite),
        Command::Mapgen { kind, size, seed, resolution, out } => cmd_mapgen(&kind, &size, seed, resolution, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
