//! End-to-end training runs and their metrics.
//!
//! Each seed runs an independent agent: collect an episode with the
//! behavior policy, store it, take `optim_steps` optimizer steps, and at the
//! end of every epoch evaluate the deterministic policy and measure how
//! trajectory energy correlates with TD error across the buffer.

mod config;
pub mod metrics;
mod report;
mod rollout;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{RunConfig, Strategy};
pub use report::{compare_runs, read_seed_csv, write_run, Comparison, ComparisonRow, RunSummary};
pub use rollout::{evaluate, evaluate_policy, rollout};

use crate::agent::Ddpg;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::per::PrioritizedStore;
use crate::replay::{Batch, BatchBuilder, Episode, ReplayBuffer, RewardFn};

/// Metrics at the end of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub success_rate: f64,
    pub cumulative_samples: u64,
    pub mean_energy: f64,
    pub max_energy: f64,
    /// Correlation between episode energy and mean |TD error|; `None` when
    /// undefined (e.g. every stored energy is equal).
    pub pearson_r: Option<f64>,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub wall_clock: f64,
}

/// Outcome of training one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    /// Highest evaluation success seen and the agent that achieved it.
    pub best_success: f64,
    pub best_agent: Ddpg,
    /// Set when training stopped on a non-finite loss.
    pub diverged: Option<String>,
}

impl SeedRun {
    pub fn samples_to_threshold(&self, threshold: f64) -> Option<u64> {
        let curve: Vec<(u64, f64)> = self.records.iter().map(|r| (r.cumulative_samples, r.success_rate)).collect();
        metrics::samples_to_threshold(&curve, threshold)
    }

    /// Correlation reported at the given 1-based epoch.
    pub fn pearson_at(&self, epoch: usize) -> Option<f64> {
        self.records.iter().find(|r| r.epoch == epoch).and_then(|r| r.pearson_r)
    }
}

/// Independent random streams derived from one seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const INIT_STREAM: u64 = 0;
const ENV_STREAM: u64 = 1;
const EXPLORE_STREAM: u64 = 2;
const REPLAY_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 4;

/// A transition held by the prioritized baseline: step `t` of an episode,
/// with the goal taken from achieved-goal index `goal_t` if relabeled.
#[derive(Debug, Clone, Copy)]
struct TransitionRef {
    episode: u64,
    t: u32,
    goal_t: Option<u32>,
}

/// Prioritized replay at transition granularity. Relabeled copies are
/// created at insertion so each carries its own priority.
struct PerReplay {
    store: PrioritizedStore<TransitionRef>,
    future_k: usize,
}

impl PerReplay {
    fn new(config: &RunConfig) -> Result<Self> {
        let horizon = config.env.spec().horizon;
        let block = horizon + config.per_future_k * horizon.saturating_sub(1);
        Ok(Self {
            store: PrioritizedStore::new(config.buffer_episodes * block, config.per)?,
            future_k: config.per_future_k,
        })
    }

    fn insert<R: Rng + ?Sized>(&mut self, episode: &Episode, id: u64, rng: &mut R) {
        let horizon = episode.len();
        for t in 0..horizon {
            self.store.insert(TransitionRef { episode: id, t: t as u32, goal_t: None });
            if t + 1 < horizon {
                for _ in 0..self.future_k {
                    let future = rng.gen_range(t + 1..horizon);
                    self.store.insert(TransitionRef { episode: id, t: t as u32, goal_t: Some(future as u32) });
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        spec: &EnvSpec,
        rng: &mut R,
    ) -> Result<(Batch, Vec<usize>)> {
        let first = buffer.episodes().next().ok_or(Error::EmptyBuffer)?;
        let mut builder = BatchBuilder::new(batch_size, first.obs_dim(), first.action_dim(), first.goal_dim());
        let mut slots = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let slot = self.store.sample(rng)?;
            let item = *self.store.get(slot).ok_or(Error::Index { index: slot, capacity: self.store.len() })?;
            let episode = buffer
                .get(item.episode)
                .ok_or_else(|| Error::InvalidEpisode(format!("episode {} was evicted", item.episode)))?;
            let t = item.t as usize;
            match item.goal_t {
                Some(g) => {
                    let goal = episode.achieved_goal(g as usize);
                    let reward = spec.reward(episode.achieved_goal(t + 1), goal)?;
                    builder.push(episode, t, goal, reward, true);
                }
                None => builder.push(episode, t, episode.goal(), episode.rewards()[t], false),
            }
            slots.push(slot);
        }
        Ok((builder.finish(), slots))
    }
}

/// Batch of every transition of `episode` under its original goal.
fn episode_batch(episode: &Episode) -> Batch {
    let mut builder = BatchBuilder::new(episode.len(), episode.obs_dim(), episode.action_dim(), episode.goal_dim());
    for t in 0..episode.len() {
        builder.push(episode, t, episode.goal(), episode.rewards()[t], false);
    }
    builder.finish()
}

/// Pearson r between stored trajectory energies and per-episode mean |TD
/// error| under the agent's current critic.
pub fn energy_td_correlation(agent: &Ddpg, buffer: &ReplayBuffer) -> Result<f64> {
    let mut energies = Vec::with_capacity(buffer.len());
    let mut td = Vec::with_capacity(buffer.len());
    for episode in buffer.episodes() {
        let errors = agent.td_errors(&episode_batch(episode))?;
        energies.push(episode.trajectory_energy());
        td.push(errors.iter().map(|d| d.abs()).sum::<f64>() / errors.len() as f64);
    }
    metrics::pearson_r(&energies, &td)
}

/// Trains every seed in the config in order.
pub fn train(config: &RunConfig) -> Result<Vec<SeedRun>> {
    config.validate()?;
    config.seeds.iter().map(|&seed| train_seed(config, seed)).collect()
}

/// Trains one seed.
pub fn train_seed(config: &RunConfig, seed: u64) -> Result<SeedRun> {
    config.validate()?;
    let spec = config.env.spec();
    let params = config.energy_params();
    let mut init_rng = stream(seed, INIT_STREAM);
    let mut env_rng = stream(seed, ENV_STREAM);
    let mut explore_rng = stream(seed, EXPLORE_STREAM);
    let mut replay_rng = stream(seed, REPLAY_STREAM);
    let mut eval_rng = stream(seed, EVAL_STREAM);

    let mut agent = Ddpg::new(spec.obs_dim, spec.goal_dim, spec.action_dim, config.agent.clone(), &mut init_rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_episodes, config.strategy.sampling())?;
    let mut per = match config.strategy {
        Strategy::PerHer => Some(PerReplay::new(config)?),
        _ => None,
    };
    let mut env = config.env.make();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best_success = f64::NEG_INFINITY;
    let mut best_agent = agent.clone();
    let mut diverged = None;
    let mut cumulative_samples = 0u64;

    'epochs: for epoch in 1..=config.epochs {
        let start = Instant::now();
        let (mut critic_sum, mut actor_sum, mut steps) = (0.0, 0.0, 0usize);
        for _ in 0..config.episodes_per_epoch {
            let mut episode = rollout(&mut env, &mut env_rng, &params, |_, obs, goal| {
                agent.explore(obs, goal, &mut explore_rng)
            })?;
            cumulative_samples += episode.len() as u64;
            if let Some(c) = config.constant_energy {
                episode = episode.with_energy(c)?;
            }
            agent.update_normalizers(&episode)?;
            let id = buffer.insert(episode)?;
            if let Some(per) = per.as_mut() {
                per.insert(buffer.get(id).expect("just inserted"), id, &mut replay_rng);
            }

            for _ in 0..config.optim_steps {
                let step = match per.as_mut() {
                    Some(per) => {
                        let (batch, slots) = per.sample(&buffer, config.batch_size, &spec, &mut replay_rng)?;
                        agent.train_step(&batch).and_then(|stats| {
                            per.store.update_priorities(&slots, &stats.td_errors)?;
                            Ok(stats)
                        })
                    }
                    None => {
                        let batch = buffer.make_batch(config.batch_size, config.her_ratio, &mut replay_rng, &spec)?;
                        agent.train_step(&batch)
                    }
                };
                match step {
                    Ok(stats) => {
                        critic_sum += stats.critic_loss;
                        actor_sum += stats.actor_loss;
                        steps += 1;
                    }
                    Err(e @ (Error::Divergence(_) | Error::InvalidPriority(_))) => {
                        log::warn!("seed {seed}: training diverged in epoch {epoch}: {e}");
                        diverged = Some(format!("epoch {epoch}: {e}"));
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let success_rate = rollout::evaluate_with(&agent, config.env, config.eval_episodes, &mut eval_rng)?;
        if success_rate > best_success {
            best_success = success_rate;
            best_agent = agent.clone();
        }
        let pearson_r = match energy_td_correlation(&agent, &buffer) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        let energies: Vec<f64> = buffer.episodes().map(Episode::trajectory_energy).collect();
        let denom = steps.max(1) as f64;
        let record = EpochRecord {
            epoch,
            success_rate,
            cumulative_samples,
            mean_energy: buffer.energy_sum() / buffer.len() as f64,
            max_energy: energies.iter().copied().fold(0.0, f64::max),
            pearson_r,
            critic_loss: critic_sum / denom,
            actor_loss: actor_sum / denom,
            wall_clock: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "{} {} seed {seed} epoch {epoch}: success {:.3}, samples {}, r {}",
            config.env,
            config.strategy,
            record.success_rate,
            record.cumulative_samples,
            record.pearson_r.map_or("-".into(), |r| format!("{r:.3}"))
        );
        records.push(record);
    }

    Ok(SeedRun { seed, records, best_success: best_success.max(0.0), best_agent, diverged })
}
