//! Trains one strategy on one environment and prints the learning curve.
//!
//! cargo run --release --example train -- [config file] [key=value ...]

use ebp::harness::{self, RunConfig};

fn main() -> ebp::Result<()> {
    let mut config = RunConfig { seeds: vec![0], epochs: 10, ..RunConfig::default() };
    for arg in std::env::args().skip(1) {
        match arg.split_once('=') {
            Some((k, v)) => config.set(k.trim(), v.trim())?,
            None => config.apply_text(&std::fs::read_to_string(&arg).map_err(|e| ebp::Error::Parse(e.to_string()))?)?,
        }
    }
    config.validate()?;
    println!("{} / {}", config.env, config.strategy);
    for &seed in &config.seeds {
        let run = harness::train_seed(&config, seed)?;
        for r in &run.records {
            println!(
                "seed {seed} epoch {:>3}  success {:.2}  samples {:>7}  energy {:.3}  r {:>6}  critic {:.4}  actor {:.3}  {:.1}s",
                r.epoch,
                r.success_rate,
                r.cumulative_samples,
                r.mean_energy,
                r.pearson_r.map_or("-".into(), |v| format!("{v:.3}")),
                r.critic_loss,
                r.actor_loss,
                r.wall_clock
            );
        }
        match run.samples_to_threshold(config.success_threshold) {
            Some(n) => println!("seed {seed}: reached {} after {n} samples", config.success_threshold),
            None => println!("seed {seed}: threshold not reached"),
        }
    }
    Ok(())
}
