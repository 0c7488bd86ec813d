//! Fills an energy-prioritized buffer with random-policy episodes and draws
//! one hindsight-relabeled minibatch.
//!
//! cargo run --release --example her_batch

use ebp::envs::EnvKind;
use ebp::harness::rollout;
use ebp::replay::{relabel_future, ReplayBuffer, SamplingStrategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ebp::Result<()> {
    let kind = EnvKind::PlanarPush;
    let spec = kind.spec();
    let params = ebp::energy::EnergyParams::with_clip(spec.e_tran_max)?;
    let mut env = kind.make();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(4);

    let mut buffer = ReplayBuffer::new(8, SamplingStrategy::Energy)?;
    for _ in 0..12 {
        let episode = rollout(&mut env, &mut rng, &params, |_, _, _| {
            Ok((0..spec.action_dim).map(|_| policy_rng.gen_range(-1.0..1.0)).collect())
        })?;
        buffer.insert(episode)?;
    }
    println!("{} episodes stored of {} inserted, energy sum {:.4}", buffer.len(), buffer.inserted(), buffer.energy_sum());
    for (episode, p) in buffer.episodes().zip(buffer.sampling_probabilities()) {
        println!("episode {:>2}: energy {:.4}  p {:.3}", episode.insertion_index(), episode.trajectory_energy(), p);
    }

    let episode = buffer.sample_episode(&mut rng)?;
    let (goal, reward) = relabel_future(episode, 10, &mut rng, &spec)?;
    println!("episode {} t=10 relabeled to {goal:.3?}, reward {reward}", episode.insertion_index());

    let batch = buffer.make_batch(16, 0.8, &mut rng, &spec)?;
    let relabeled = batch.relabeled.iter().filter(|&&r| r).count();
    let hits = batch.rewards.iter().filter(|&&r| r == 0.0).count();
    println!("batch of {}: {relabeled} relabeled, {hits} with reward 0", batch.rewards.len());
    Ok(())
}
