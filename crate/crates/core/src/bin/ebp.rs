use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebp::energy::{transition_energies, EnergyParams};
use ebp::envs::trace::read_trace;
use ebp::harness::{self, RunConfig, RunSummary};
use ebp::{Error, Result};

#[derive(Parser)]
#[command(name = "ebp", version, about = "Energy-based prioritized hindsight replay on desk-scale tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy on one environment and write a run directory.
    Train {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        /// Comma-separated seeds.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Flat `key = value` config file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute trajectory energies of episodes in a JSON-lines trace.
    ReplayAnalyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        e_tran_max: f64,
    },
    /// Sample-efficiency ratios between run directories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Also write the per-seed table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn train(
    env: Option<String>,
    strategy: Option<String>,
    seeds: Option<String>,
    epochs: Option<usize>,
    config: Option<PathBuf>,
    overrides: Vec<String>,
    out: PathBuf,
) -> Result<()> {
    let mut run = RunConfig::default();
    if let Some(path) = config {
        run.apply_text(&fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?)?;
    }
    for (key, value) in [("env", env), ("strategy", strategy), ("seeds", seeds), ("epochs", epochs.map(|e| e.to_string()))] {
        if let Some(v) = value {
            run.set(key, &v)?;
        }
    }
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        run.set(k.trim(), v.trim())?;
    }
    run.validate()?;
    let runs = harness::train(&run)?;
    harness::write_run(&out, &run, &runs)?;
    for r in &runs {
        let reached = r
            .samples_to_threshold(run.success_threshold)
            .map_or("not reached".to_string(), |n| format!("{n} samples"));
        let diverged = r.diverged.as_deref().map_or(String::new(), |d| format!(" (diverged: {d})"));
        println!("seed {}: best success {:.2}, threshold {reached}{diverged}", r.seed, r.best_success);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn replay_analyze(trace: PathBuf, e_tran_max: f64) -> Result<()> {
    let params = EnergyParams::with_clip(e_tran_max)?;
    let episodes = read_trace(&trace)?;
    println!("episode,steps,trajectory_energy,max_transition_energy");
    for (i, records) in episodes.iter().enumerate() {
        let states = records.iter().map(|r| r.object_state()).collect::<Result<Vec<_>>>()?;
        let energies = transition_energies(&states, &params)?;
        let max = energies.iter().copied().fold(0.0, f64::max);
        println!("{i},{},{},{max}", records.len() - 1, energies.iter().sum::<f64>());
    }
    Ok(())
}

fn compare(runs: Vec<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let summaries = runs.iter().map(|d| RunSummary::load(d)).collect::<Result<Vec<_>>>()?;
    let comparison = harness::compare_runs(&summaries)?;
    print!("{}", comparison.to_csv());
    println!();
    print!("{}", comparison.summary_csv());
    if let Some(path) = out {
        fs::write(&path, comparison.to_csv()).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().command {
        Command::Train { env, strategy, seeds, epochs, config, overrides, out } => {
            train(env, strategy, seeds, epochs, config, overrides, out)
        }
        Command::ReplayAnalyze { trace, e_tran_max } => replay_analyze(trace, e_tran_max),
        Command::Compare { runs, out } => compare(runs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
