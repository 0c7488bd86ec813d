//! Trains briefly, saves the best policy, reloads it and re-evaluates.
//!
//! cargo run --release --example checkpoint -- [path]

use std::path::PathBuf;

use ebp::agent::{load_checkpoint, save_checkpoint};
use ebp::envs::EnvKind;
use ebp::harness::{self, RunConfig};

fn main() -> ebp::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "best.ckpt".into()));
    let config = RunConfig { env: EnvKind::PlanarPush, seeds: vec![0], epochs: 5, ..RunConfig::default() };
    let run = harness::train_seed(&config, 0)?;
    save_checkpoint(&run.best_agent, &path)?;
    let agent = load_checkpoint(&path)?;
    let before = harness::evaluate(&run.best_agent, config.env, 50, 7)?;
    let after = harness::evaluate(&agent, config.env, 50, 7)?;
    println!("best training success {:.2}; 50 fresh episodes: {before:.2} before save, {after:.2} after reload", run.best_success);
    Ok(())
}
