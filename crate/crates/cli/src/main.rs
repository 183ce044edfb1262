//! `entroflow`: configuration-driven runner for the numerical experiments.

mod artifacts;
mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use crate::run::{Overrides, RunError};

#[derive(Parser)]
#[command(name = "entroflow", version, about = "Log-Sobolev and Ricci-flow experiments on warped products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Dry-run schema and budget check.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several configs concurrently, each into `OUT/<config stem>`.
    Batch {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
}

const EXIT_MODULE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn run_one(config: &Path, out: Option<&Path>, ov: Overrides) -> Result<PathBuf, (u8, String)> {
    let loaded = config::load(config).map_err(|e| (EXIT_USAGE, e))?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| loaded.config.output.as_ref().map(|o| loaded.dir.join(o)))
        .ok_or((EXIT_USAGE, "no output directory: pass --out or set `output`".to_string()))?;
    let art = run::execute(&loaded, ov).map_err(|e| match e {
        RunError::Usage(m) => (EXIT_USAGE, m),
        RunError::Module(e) => (EXIT_MODULE, e.to_string()),
    })?;
    let seed = ov.seed.unwrap_or(loaded.config.seed);
    art.write(&dir, &loaded.config.kind.to_string(), seed, &loaded.bytes)
        .map_err(|e| (EXIT_MODULE, format!("cannot write {}: {e}", dir.display())))?;
    Ok(dir)
}

fn batch_threads(jobs: usize) -> usize {
    let cap = std::env::var("ENTROFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config, out, seed, checkpoint_every } => {
            match run_one(&config, out.as_deref(), Overrides { seed, checkpoint_every }) {
                Ok(dir) => {
                    println!("wrote {}", dir.display());
                    ExitCode::SUCCESS
                }
                Err((code, msg)) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(code)
                }
            }
        }
        // validation reports problems rather than failing
        Command::Validate { config } => {
            match config::load(&config) {
                Ok(loaded) => print!("{}", config::validate(&loaded)),
                Err(e) => println!("error: {e}"),
            }
            ExitCode::SUCCESS
        }
        Command::Batch { configs, out, seed, checkpoint_every } => {
            let ov = Overrides { seed, checkpoint_every };
            let next = AtomicUsize::new(0);
            let results = Mutex::new(vec![None; configs.len()]);
            std::thread::scope(|s| {
                for _ in 0..batch_threads(configs.len()) {
                    s.spawn(|| loop {
                        let k = next.fetch_add(1, Ordering::SeqCst);
                        let Some(cfg) = configs.get(k) else { break };
                        let stem = cfg.file_stem().map_or_else(|| format!("job{k}"), |s| s.to_string_lossy().into());
                        let r = run_one(cfg, Some(&out.join(stem)), ov);
                        results.lock().unwrap()[k] = Some(r);
                    });
                }
            });
            let mut worst = 0u8;
            for (cfg, r) in configs.iter().zip(results.into_inner().unwrap()) {
                match r.expect("every job ran") {
                    Ok(dir) => println!("{}: wrote {}", cfg.display(), dir.display()),
                    Err((code, msg)) => {
                        eprintln!("{}: error: {msg}", cfg.display());
                        worst = worst.max(code);
                    }
                }
            }
            ExitCode::from(worst)
        }
    }
}
