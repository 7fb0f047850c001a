use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::ablation::{run_grid, summarize, summary_csv, AblationGrid, Axis, DEFAULT_SEEDS};
use super::config::{resolve_output, RunConfig};
use super::run::{evaluate_run, run_training};
use crate::agent::{stream_rng, Stream};
use crate::data::{collect_offline, PdController};
use crate::envs::{Task, TaskSpec};
use crate::error::{ConfigError, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hybridrl",
    version,
    about = "Hybrid offline-and-online RL experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record a scripted-controller dataset in the reference environment.
    Collect {
        #[arg(long, default_value = "standing_still")]
        task: String,
        #[arg(long, default_value_t = 16_588)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one run.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a key, e.g. `--set agent.lambda=0.5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Run directory; defaults to `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained run in the reference environment.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the statistics; defaults to `<run>.eval.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or resume) a one-axis grid and write its summary.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value = "ablations")]
        root: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize an ablation directory into a CSV table.
    Report {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: o.clone(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect { task, n, seed, out } => {
            let task = Task::from_tag(&task)
                .ok_or_else(|| Error::InvalidParams(format!("unknown task `{task}`")))?;
            if n == 0 {
                return Err(Error::InvalidParams("--n must be positive".into()));
            }
            let spec = TaskSpec::new(task);
            let ds = collect_offline(
                &spec,
                &PdController::default(),
                n,
                &mut stream_rng(seed, Stream::Env),
            );
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            ds.save(&out)?;
            println!("wrote {} transitions to {}", ds.len(), out.display());
        }
        Command::Train {
            config,
            overrides,
            out,
        } => {
            let mut cfg = base_config(config.as_deref(), &overrides)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let dir = resolve_output(&cfg.output_dir);
            cfg.output_dir = dir.clone();
            let outcome = run_training(&cfg, &dir)?;
            match outcome.final_score {
                Some(s) => println!("{}: final score {s}", dir.display()),
                None => println!("{}: no evaluations recorded", dir.display()),
            }
        }
        Command::Evaluate {
            run,
            episodes,
            seed,
            out,
        } => {
            let stats = evaluate_run(&run, episodes, seed)?;
            let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
            let out = out.unwrap_or_else(|| {
                let mut p = run.clone().into_os_string();
                p.push(".eval.json");
                PathBuf::from(p)
            });
            write_file(&out, &json)?;
            println!(
                "mean {} std {} over {} episodes",
                stats.mean,
                stats.std,
                stats.returns.len()
            );
        }
        Command::Ablate {
            config,
            overrides,
            axis,
            values,
            seeds,
            root,
            jobs,
        } => {
            let axis = Axis::from_tag(&axis)
                .ok_or_else(|| Error::InvalidParams(format!("unknown axis `{axis}`")))?;
            let base = base_config(config.as_deref(), &overrides)?;
            let grid = AblationGrid::new(axis, values, seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec()));
            let root = resolve_output(&root);
            let ran = run_grid(&base, &grid, &root, jobs)?;
            let csv = summary_csv(&summarize(&grid, &root)?);
            write_file(&root.join("summary.csv"), &csv)?;
            eprintln!("ran {ran} of {} runs", grid.values.len() * grid.seeds.len());
            print!("{csv}");
        }
        Command::Report { root, out } => {
            let root = resolve_output(&root);
            let grid = AblationGrid::load(&root)?;
            let csv = summary_csv(&summarize(&grid, &root)?);
            write_file(&out.unwrap_or_else(|| root.join("summary.csv")), &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command, and maps errors to a nonzero exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
