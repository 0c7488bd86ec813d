//! Run directories.
//!
//! A run directory holds `config.txt`, one `seed_<s>.csv` per seed,
//! `aggregate.csv` (mean and std across seeds), `thresholds.csv`,
//! `timing.jsonl` and the best checkpoint per seed. Everything except the
//! timing file is a pure function of the config, so repeated runs produce
//! identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::{self, mean_std};
use super::{RunConfig, SeedRun, Strategy};
use crate::agent::save_checkpoint;
use crate::envs::EnvKind;
use crate::error::{Error, Result};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub const SEED_HEADER: [&str; 8] = [
    "epoch",
    "success_rate",
    "cumulative_samples",
    "mean_energy",
    "max_energy",
    "pearson_r",
    "critic_loss",
    "actor_loss",
];

pub fn seed_csv_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

#[derive(Serialize)]
struct TimingLine<'a> {
    strategy: &'a str,
    seed: u64,
    epoch: usize,
    seconds: f64,
}

/// Writes every output file for a finished run.
pub fn write_run(dir: &Path, config: &RunConfig, runs: &[SeedRun]) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::Config("no seed runs to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.txt");
    fs::write(&config_path, config.to_text()).map_err(|e| Error::io(&config_path, e))?;

    for run in runs {
        let rows: Vec<Vec<String>> = run
            .records
            .iter()
            .map(|r| {
                vec![
                    r.epoch.to_string(),
                    r.success_rate.to_string(),
                    r.cumulative_samples.to_string(),
                    r.mean_energy.to_string(),
                    r.max_energy.to_string(),
                    opt(r.pearson_r),
                    r.critic_loss.to_string(),
                    r.actor_loss.to_string(),
                ]
            })
            .collect();
        write_csv(&seed_csv_path(dir, run.seed), &SEED_HEADER, &rows)?;
        save_checkpoint(&run.best_agent, &dir.join(format!("best_seed_{}.ckpt", run.seed)))?;
    }

    let epochs = runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let mut aggregate = Vec::with_capacity(epochs);
    for i in 0..epochs {
        let at: Vec<_> = runs.iter().filter_map(|r| r.records.get(i)).collect();
        let success: Vec<f64> = at.iter().map(|r| r.success_rate).collect();
        let pearson: Vec<f64> = at.iter().filter_map(|r| r.pearson_r).collect();
        let (s_mean, s_std) = mean_std(&success).expect("at least one run reached this epoch");
        let p = mean_std(&pearson);
        aggregate.push(vec![
            (i + 1).to_string(),
            at[0].cumulative_samples.to_string(),
            s_mean.to_string(),
            s_std.to_string(),
            opt(p.map(|p| p.0)),
            opt(p.map(|p| p.1)),
            at.len().to_string(),
        ]);
    }
    write_csv(
        &dir.join("aggregate.csv"),
        &["epoch", "cumulative_samples", "success_mean", "success_std", "pearson_mean", "pearson_std", "seeds"],
        &aggregate,
    )?;

    let thresholds: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                opt(r.samples_to_threshold(config.success_threshold)),
                r.best_success.to_string(),
                opt(r.pearson_at(config.correlation_epoch())),
                r.diverged.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("thresholds.csv"),
        &["seed", "samples_to_threshold", "best_success", "mid_pearson_r", "diverged"],
        &thresholds,
    )?;

    let timing_path = dir.join("timing.jsonl");
    let mut timing = fs::File::create(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
    for run in runs {
        for r in &run.records {
            let line = TimingLine { strategy: config.strategy.name(), seed: run.seed, epoch: r.epoch, seconds: r.wall_clock };
            let text = serde_json::to_string(&line).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(timing, "{text}").map_err(|e| Error::io(&timing_path, e))?;
        }
    }
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader.records().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

fn field<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    match record.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{}: bad value {v:?} in column {i}", path.display()))),
    }
}

/// `(cumulative_samples, success_rate)` points of a per-seed CSV.
pub fn read_seed_csv(path: &Path) -> Result<Vec<(u64, f64)>> {
    read_rows(path)?
        .iter()
        .map(|r| {
            let samples = field(path, r, 2)?;
            let success = field(path, r, 1)?;
            samples
                .zip(success)
                .ok_or_else(|| Error::Parse(format!("{}: missing samples or success", path.display())))
        })
        .collect()
}

/// Config and threshold crossings of a finished run directory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub samples_to_threshold: Vec<(u64, Option<u64>)>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join("config.txt"))?;
        let path = dir.join("thresholds.csv");
        let samples_to_threshold = read_rows(&path)?
            .iter()
            .map(|r| {
                let seed = field(&path, r, 0)?.ok_or_else(|| Error::Parse(format!("{}: missing seed", path.display())))?;
                Ok((seed, field(&path, r, 1)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dir: dir.to_path_buf(), config, samples_to_threshold })
    }

    /// Samples used when the threshold is never reached: one epoch past the
    /// budget, a conservative stand-in.
    pub fn censored_samples(&self) -> u64 {
        (self.config.epochs as u64 + 1) * self.config.samples_per_epoch()
    }

    fn samples_for(&self, seed: u64) -> Option<Option<u64>> {
        self.samples_to_threshold.iter().find(|(s, _)| *s == seed).map(|(_, n)| *n)
    }
}

/// One paired seed: baseline samples ÷ energy-prioritized samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub env: EnvKind,
    pub baseline: Strategy,
    pub seed: u64,
    pub baseline_samples: Option<u64>,
    pub ebp_samples: Option<u64>,
    /// Computed with unreached thresholds censored at one epoch past budget.
    pub ratio: f64,
    /// Energy prioritization reached the threshold with fewer samples.
    pub ebp_wins: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// `(env, baseline, pairs, ebp wins, median ratio)` per baseline.
    pub fn summary(&self) -> Vec<(EnvKind, Strategy, usize, usize, f64)> {
        let mut keys: Vec<(EnvKind, Strategy)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.env, r.baseline)) {
                keys.push((r.env, r.baseline));
            }
        }
        keys.into_iter()
            .map(|(env, baseline)| {
                let rows: Vec<_> = self.rows.iter().filter(|r| r.env == env && r.baseline == baseline).collect();
                let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
                let wins = rows.iter().filter(|r| r.ebp_wins).count();
                (env, baseline, rows.len(), wins, metrics::median(&ratios).unwrap_or(f64::NAN))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("env,baseline,seed,baseline_samples,ebp_samples,ratio,ebp_wins\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{},{:.2},{}\n",
                r.env,
                r.baseline,
                r.seed,
                opt(r.baseline_samples),
                opt(r.ebp_samples),
                r.ratio,
                r.ebp_wins
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("env,baseline,pairs,ebp_wins,median_ratio\n");
        for (env, baseline, pairs, wins, median) in self.summary() {
            out += &format!("{env},{baseline},{pairs},{wins},{median:.2}\n");
        }
        out
    }
}

/// Pairs every baseline run with the energy-prioritized run of the same
/// environment, seed by seed.
pub fn compare_runs(runs: &[RunSummary]) -> Result<Comparison> {
    let mut rows = Vec::new();
    for ebp in runs.iter().filter(|r| r.config.strategy == Strategy::EbpHer) {
        for base in runs
            .iter()
            .filter(|r| r.config.strategy != Strategy::EbpHer && r.config.env == ebp.config.env)
        {
            for &(seed, ebp_samples) in &ebp.samples_to_threshold {
                let Some(baseline_samples) = base.samples_for(seed) else { continue };
                let e = ebp_samples.unwrap_or(ebp.censored_samples()) as f64;
                let b = baseline_samples.unwrap_or(base.censored_samples()) as f64;
                rows.push(ComparisonRow {
                    env: ebp.config.env,
                    baseline: base.config.strategy,
                    seed,
                    baseline_samples,
                    ebp_samples,
                    ratio: metrics::efficiency_ratio(b, e),
                    ebp_wins: ebp_samples.is_some() && e < b,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(
            "nothing to compare: need an ebp-her run and a baseline run on the same env with shared seeds".into(),
        ));
    }
    Ok(Comparison { rows })
}
