//! Trains a few epochs, then measures how trajectory energy tracks mean
//! |TD error| on fresh exploration episodes.
//!
//! cargo run --release --example correlation -- [epochs]

use ebp::envs::EnvKind;
use ebp::harness::{self, rollout, RunConfig, Strategy};
use ebp::replay::{ReplayBuffer, SamplingStrategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ebp::Result<()> {
    let epochs = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).expect("epochs must be an integer");
    let config = RunConfig {
        env: EnvKind::PlanarPickPlace,
        strategy: Strategy::EbpHer,
        seeds: vec![0],
        epochs,
        ..RunConfig::default()
    };
    let run = harness::train_seed(&config, 0)?;
    for r in &run.records {
        let r_text = r.pearson_r.map_or("undefined".into(), |v| format!("{v:.3}"));
        println!("epoch {} success {:.2} buffer r {r_text}", r.epoch, r.success_rate);
    }

    let agent = &run.best_agent;
    let params = config.energy_params();
    let mut env = config.env.make();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut noise = ChaCha8Rng::seed_from_u64(100);
    let mut fresh = ReplayBuffer::new(40, SamplingStrategy::Uniform)?;
    for _ in 0..40 {
        fresh.insert(rollout(&mut env, &mut rng, &params, |_, obs, goal| agent.explore(obs, goal, &mut noise))?)?;
    }
    match harness::energy_td_correlation(agent, &fresh) {
        Ok(r) => println!("best agent on 40 fresh episodes: r = {r:.3}"),
        Err(e) => println!("best agent on 40 fresh episodes: {e}"),
    }
    Ok(())
}
