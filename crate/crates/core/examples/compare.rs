//! Short uniform-her and ebp-her runs written to run directories, then
//! paired seed by seed.
//!
//! cargo run --release --example compare -- [out dir]

use std::path::PathBuf;

use ebp::envs::EnvKind;
use ebp::harness::{self, RunConfig, RunSummary, Strategy};

fn main() -> ebp::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/compare-example".into()));
    let mut summaries = Vec::new();
    for strategy in [Strategy::UniformHer, Strategy::EbpHer] {
        let config = RunConfig {
            env: EnvKind::PlanarPush,
            strategy,
            seeds: vec![0, 1],
            epochs: 8,
            success_threshold: 0.5,
            ..RunConfig::default()
        };
        let dir = root.join(strategy.name());
        let runs = harness::train(&config)?;
        harness::write_run(&dir, &config, &runs)?;
        summaries.push(RunSummary::load(&dir)?);
    }
    let comparison = harness::compare_runs(&summaries)?;
    print!("{}\n{}", comparison.to_csv(), comparison.summary_csv());
    Ok(())
}
