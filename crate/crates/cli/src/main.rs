//! `bernstein-lab`: run experiment configs and list what is available.

mod catalog;
mod config;
mod experiments;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 2;
const EXIT_LAB: u8 = 3;
const EXIT_FLAG: u8 = 4;
const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(
    name = "bernstein-lab",
    version,
    about = "Numerical checks of Bernstein-type inequalities"
)]
struct Cli {
    /// Worker threads; 0 picks BERNSTEIN_LAB_THREADS or the core count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `run.out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optimizer seed (overrides `run.seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "on")]
        svg: Toggle,
        /// Exit with status 4 when a check is flagged.
        #[arg(long)]
        strict: bool,
    },
    /// List model kinds.
    ListModels,
    /// List experiment types with their inequality tags.
    ListExperiments,
    /// Run quick closed-form checks.
    Selftest,
}

fn threads(flag: usize) -> usize {
    if flag > 0 {
        return flag;
    }
    std::env::var("BERNSTEIN_LAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(cli.threads))
        .build_global()
    {
        eprintln!("warning: {e}");
    }
    match cli.command {
        Command::ListModels => {
            print!("{}", catalog::render(&catalog::MODELS));
            ExitCode::SUCCESS
        }
        Command::ListExperiments => {
            print!("{}", catalog::render(&catalog::EXPERIMENTS));
            ExitCode::SUCCESS
        }
        Command::Selftest => {
            if selftest::run() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_LAB)
            }
        }
        Command::Run {
            config,
            out,
            seed,
            svg,
            strict,
        } => run(config, out, seed, matches!(svg, Toggle::On), strict),
    }
}

fn run(
    path: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    svg: bool,
    strict: bool,
) -> ExitCode {
    let loaded = match config::load(&path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = &loaded.config;
    let seed = seed.or(cfg.run.seed).unwrap_or(DEFAULT_SEED);
    let dir = out
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let name = cfg.run.name.clone().unwrap_or_else(|| {
        loaded
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });

    let start = Instant::now();
    let outcome = match experiments::run(cfg, seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_LAB);
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let record = output::RunRecord::new(
        &outcome,
        cfg.model.name(),
        cfg.experiment.name(),
        output::config_hash(&loaded.text, seed),
        seed,
        wall,
    );
    let written = match output::write_all(&dir, &name, &outcome, &record, svg) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return ExitCode::from(EXIT_LAB);
        }
    };
    print!("{}", output::summary(&record));
    println!("wrote {}", written.csv.display());
    for f in written.files.iter().filter(|f| **f != written.csv) {
        println!("wrote {}", f.display());
    }
    if strict && outcome.checks.iter().any(|c| !c.pass) {
        return ExitCode::from(EXIT_FLAG);
    }
    ExitCode::SUCCESS
}
