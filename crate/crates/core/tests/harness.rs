mod common;

use std::fs;
use std::path::Path;

use ebp::agent::load_checkpoint;
use ebp::energy::EnergyParams;
use ebp::envs::{EnvKind, HORIZON};
use ebp::harness::{self, evaluate, rollout, RunConfig, Strategy};
use ebp::replay::{ReplayBuffer, SamplingStrategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny(env: EnvKind, strategy: Strategy) -> RunConfig {
    RunConfig {
        env,
        strategy,
        seeds: vec![3, 4],
        epochs: 2,
        episodes_per_epoch: 3,
        optim_steps: 2,
        batch_size: 8,
        eval_episodes: 2,
        buffer_episodes: 4,
        ..RunConfig::default()
    }
}

fn file_bytes(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn repeated_runs_are_byte_identical() {
    for strategy in Strategy::ALL {
        let config = tiny(EnvKind::PlanarPickPlace, strategy);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        harness::write_run(a.path(), &config, &harness::train(&config).unwrap()).unwrap();
        harness::write_run(b.path(), &config, &harness::train(&config).unwrap()).unwrap();
        for name in ["seed_3.csv", "seed_4.csv", "aggregate.csv", "thresholds.csv", "config.txt", "best_seed_3.ckpt"] {
            assert_eq!(file_bytes(a.path(), name), file_bytes(b.path(), name), "{strategy}: {name}");
        }
    }
}

#[test]
fn cumulative_samples_count_every_transition() {
    let config = tiny(EnvKind::RotateBlock, Strategy::EbpHer);
    let run = harness::train_seed(&config, 0).unwrap();
    for r in &run.records {
        assert_eq!(r.cumulative_samples, (r.epoch * config.episodes_per_epoch * HORIZON) as u64);
        assert!((0.0..=1.0).contains(&r.success_rate));
    }
}

#[test]
fn zero_energy_start_trains_through_fallback() {
    let config = RunConfig { constant_energy: Some(0.0), ..tiny(EnvKind::PlanarPush, Strategy::EbpHer) };
    let run = harness::train_seed(&config, 1).unwrap();
    assert!(run.diverged.is_none());
    assert_eq!(run.records.len(), 2);
    assert!(run.records.iter().all(|r| r.mean_energy == 0.0 && r.pearson_r.is_none()));
}

#[test]
fn uniform_strategy_samples_uniformly() {
    let params = EnergyParams::default();
    let mut env = EnvKind::PlanarPush.make();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut buffer = ReplayBuffer::new(4, Strategy::UniformHer.sampling()).unwrap();
    for e in [0.0, 1.0, 5.0, 0.25] {
        let episode = rollout(&mut env, &mut rng, &params, |_, _, _| Ok(vec![0.3, -0.2])).unwrap();
        buffer.insert(episode.with_energy(e).unwrap()).unwrap();
    }
    assert_eq!(buffer.sampling_probabilities(), vec![0.25; 4]);
}

#[test]
fn constant_energy_ablation_matches_uniform() {
    let params = EnergyParams::default();
    let mut env = EnvKind::PlanarPush.make();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut energy = ReplayBuffer::new(6, SamplingStrategy::Energy).unwrap();
    for _ in 0..6 {
        let episode = rollout(&mut env, &mut rng, &params, |_, _, _| Ok(vec![1.0, 0.5])).unwrap();
        energy.insert(episode.with_energy(1.0).unwrap()).unwrap();
    }
    let mut counts = vec![0u64; 6];
    for _ in 0..100_000 {
        counts[energy.sample_episode(&mut rng).unwrap().insertion_index() as usize] += 1;
    }
    assert!(common::chi_square_p(&counts, &[1.0 / 6.0; 6]) > 0.01);
}

#[test]
fn divergence_is_reported_not_raised() {
    let mut config = tiny(EnvKind::PlanarPush, Strategy::UniformHer);
    config.agent.critic_lr = 1e6;
    config.agent.actor_lr = 1e6;
    config.epochs = 5;
    let run = harness::train_seed(&config, 0).unwrap();
    assert!(run.diverged.is_some());
    assert!(run.records.len() < 5);
}

#[test]
fn best_checkpoint_reloads() {
    let config = tiny(EnvKind::PlanarPush, Strategy::PerHer);
    let dir = tempfile::tempdir().unwrap();
    let runs = harness::train(&config).unwrap();
    harness::write_run(dir.path(), &config, &runs).unwrap();
    let agent = load_checkpoint(&dir.path().join("best_seed_3.ckpt")).unwrap();
    assert_eq!(&agent, &runs[0].best_agent);
    let rate = evaluate(&agent, EnvKind::PlanarPush, 3, 9).unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn zero_eval_episodes_rejected() {
    let config = RunConfig { eval_episodes: 0, ..tiny(EnvKind::PlanarPush, Strategy::EbpHer) };
    assert!(harness::train(&config).is_err());
}
