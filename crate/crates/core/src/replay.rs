//! Episode replay with hindsight relabeling and energy-proportional sampling.
//!
//! Episodes are stored whole in a FIFO ring together with their trajectory
//! energy, computed once on construction. Sampling picks an episode
//! (uniformly, or with probability `E_i / sum(E)`), then a timestep within
//! it uniformly, then optionally swaps the goal for an achieved goal from a
//! strictly later, non-final timestep of the same episode.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams, ObjectState};
use crate::envs::{self, EnvSpec};
use crate::error::{Error, Result};
use crate::per::SumTree;

/// Cached energies are rounded to multiples of this quantum. With every
/// stored value on a common dyadic grid, sums stay exact in `f64` in any
/// order, so the running total never drifts from a fresh recomputation.
pub const ENERGY_QUANTUM: f64 = 1.0 / (1u64 << 24) as f64;
/// Upper bound on the running energy total that keeps sums exact.
const EXACT_TOTAL_LIMIT: f64 = (1u64 << 28) as f64;

fn quantize(energy: f64) -> f64 {
    (energy / ENERGY_QUANTUM).round() * ENERGY_QUANTUM
}

/// Recomputes the reward of a transition for an arbitrary goal.
pub trait RewardFn {
    fn reward(&self, achieved: &[f64], desired: &[f64]) -> Result<f64>;
}

impl RewardFn for EnvSpec {
    fn reward(&self, achieved: &[f64], desired: &[f64]) -> Result<f64> {
        envs::compute_reward(achieved, desired, self)
    }
}

/// One materialized `(s_t, a_t, r_t, s_{t+1}, g)` tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub goal: Vec<f64>,
    pub done: bool,
}

/// A complete trajectory of `T` transitions and `T + 1` achieved goals.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    obs_dim: usize,
    action_dim: usize,
    goal_dim: usize,
    observations: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    goal: Vec<f64>,
    achieved_goals: Vec<f64>,
    object_states: Vec<ObjectState>,
    trajectory_energy: f64,
    insertion_index: u64,
}

fn flatten(rows: &[Vec<f64>], width: usize, what: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::InvalidEpisode(format!(
                "{what} row {i} has length {}, expected {width}",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

impl Episode {
    /// Builds an episode and computes its trajectory energy.
    ///
    /// `observations`, `achieved_goals` and `object_states` hold `T + 1`
    /// entries (`s_0 ..= s_T`); `actions` and `rewards` hold `T`.
    pub fn new(
        observations: &[Vec<f64>],
        actions: &[Vec<f64>],
        rewards: &[f64],
        goal: &[f64],
        achieved_goals: &[Vec<f64>],
        object_states: &[ObjectState],
        params: &EnergyParams,
    ) -> Result<Self> {
        let horizon = actions.len();
        if horizon == 0 {
            return Err(Error::InvalidEpisode("episode has no transitions".into()));
        }
        for (what, len) in [
            ("observations", observations.len()),
            ("achieved goals", achieved_goals.len()),
            ("object states", object_states.len()),
        ] {
            if len != horizon + 1 {
                return Err(Error::InvalidEpisode(format!(
                    "{len} {what} for {horizon} transitions (need {})",
                    horizon + 1
                )));
            }
        }
        if rewards.len() != horizon {
            return Err(Error::InvalidEpisode(format!(
                "{} rewards for {horizon} transitions",
                rewards.len()
            )));
        }
        if let Some(r) = rewards.iter().find(|&&r| r != 0.0 && r != -1.0) {
            return Err(Error::InvalidEpisode(format!("reward {r} is not in {{-1, 0}}")));
        }
        let obs_dim = observations[0].len();
        let action_dim = actions[0].len();
        let goal_dim = goal.len();
        let trajectory_energy = quantize(energy::trajectory_energy(object_states, params)?);
        Ok(Self {
            obs_dim,
            action_dim,
            goal_dim,
            observations: flatten(observations, obs_dim, "observation")?,
            actions: flatten(actions, action_dim, "action")?,
            rewards: rewards.to_vec(),
            goal: goal.to_vec(),
            achieved_goals: flatten(achieved_goals, goal_dim, "achieved goal")?,
            object_states: object_states.to_vec(),
            trajectory_energy,
            insertion_index: 0,
        })
    }

    /// Replaces the cached energy, e.g. for ablations that flatten priorities.
    pub fn with_energy(mut self, energy: f64) -> Result<Self> {
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(Error::InvalidEpisode(format!("energy {energy} must be finite and >= 0")));
        }
        self.trajectory_energy = quantize(energy);
        Ok(self)
    }

    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn goal_dim(&self) -> usize {
        self.goal_dim
    }

    pub fn trajectory_energy(&self) -> f64 {
        self.trajectory_energy
    }

    pub fn insertion_index(&self) -> u64 {
        self.insertion_index
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn object_states(&self) -> &[ObjectState] {
        &self.object_states
    }

    pub fn observation(&self, t: usize) -> &[f64] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * self.action_dim..(t + 1) * self.action_dim]
    }

    /// Achieved goal of state `s_t`, `t` in `0..=T`.
    pub fn achieved_goal(&self, t: usize) -> &[f64] {
        &self.achieved_goals[t * self.goal_dim..(t + 1) * self.goal_dim]
    }

    /// Sum of rewards.
    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Whether the final transition earned reward 0.
    pub fn success(&self) -> bool {
        self.rewards.last() == Some(&0.0)
    }

    pub fn transition(&self, t: usize) -> Transition {
        Transition {
            state: self.observation(t).to_vec(),
            action: self.action(t).to_vec(),
            reward: self.rewards[t],
            next_state: self.observation(t + 1).to_vec(),
            goal: self.goal.clone(),
            done: t + 1 == self.len(),
        }
    }
}

/// Samples a substitute goal from a strictly later, non-final timestep and
/// recomputes the reward of transition `t` against it.
///
/// The candidate indices are `t + 1 ..= T - 1`; the reward compares the
/// achieved goal of `s_{t+1}` with the new goal.
pub fn relabel_future<R: Rng + ?Sized>(
    episode: &Episode,
    t: usize,
    rng: &mut R,
    reward_fn: &dyn RewardFn,
) -> Result<(Vec<f64>, f64)> {
    let horizon = episode.len();
    if t + 1 >= horizon {
        return Err(Error::NoFutureGoal { t, horizon });
    }
    let future = rng.gen_range(t + 1..horizon);
    let goal = episode.achieved_goal(future).to_vec();
    let reward = reward_fn.reward(episode.achieved_goal(t + 1), &goal)?;
    Ok((goal, reward))
}

/// How episodes are chosen for replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingStrategy {
    Uniform,
    /// Probability proportional to trajectory energy; uniform while every
    /// stored energy is zero.
    Energy,
}

/// A minibatch in row-major matrices, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub goals: Array2<f64>,
    /// Insertion index of the source episode.
    pub episode_ids: Vec<u64>,
    pub timesteps: Vec<usize>,
    pub relabeled: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Accumulates batch rows.
pub(crate) struct BatchBuilder {
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    goals: Vec<f64>,
    episode_ids: Vec<u64>,
    timesteps: Vec<usize>,
    relabeled: Vec<bool>,
    dims: (usize, usize, usize),
}

impl BatchBuilder {
    pub(crate) fn new(capacity: usize, obs_dim: usize, action_dim: usize, goal_dim: usize) -> Self {
        Self {
            obs: Vec::with_capacity(capacity * obs_dim),
            actions: Vec::with_capacity(capacity * action_dim),
            rewards: Vec::with_capacity(capacity),
            next_obs: Vec::with_capacity(capacity * obs_dim),
            goals: Vec::with_capacity(capacity * goal_dim),
            episode_ids: Vec::with_capacity(capacity),
            timesteps: Vec::with_capacity(capacity),
            relabeled: Vec::with_capacity(capacity),
            dims: (obs_dim, action_dim, goal_dim),
        }
    }

    pub(crate) fn push(&mut self, episode: &Episode, t: usize, goal: &[f64], reward: f64, relabeled: bool) {
        self.obs.extend_from_slice(episode.observation(t));
        self.actions.extend_from_slice(episode.action(t));
        self.rewards.push(reward);
        self.next_obs.extend_from_slice(episode.observation(t + 1));
        self.goals.extend_from_slice(goal);
        self.episode_ids.push(episode.insertion_index);
        self.timesteps.push(t);
        self.relabeled.push(relabeled);
    }

    pub(crate) fn finish(self) -> Batch {
        let n = self.rewards.len();
        let (o, a, g) = self.dims;
        let matrix = |data: Vec<f64>, width: usize| Array2::from_shape_vec((n, width), data).expect("row widths checked on insert");
        Batch {
            obs: matrix(self.obs, o),
            actions: matrix(self.actions, a),
            rewards: self.rewards,
            next_obs: matrix(self.next_obs, o),
            goals: matrix(self.goals, g),
            episode_ids: self.episode_ids,
            timesteps: self.timesteps,
            relabeled: self.relabeled,
        }
    }
}

/// FIFO ring of episodes with a running energy total.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    strategy: SamplingStrategy,
    slots: Vec<Episode>,
    energy_tree: SumTree,
    energy_sum: f64,
    next_index: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, strategy: SamplingStrategy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            strategy,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            energy_tree: SumTree::new(capacity),
            energy_sum: 0.0,
            next_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn strategy(&self) -> SamplingStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Running total of stored trajectory energies.
    pub fn energy_sum(&self) -> f64 {
        self.energy_sum
    }

    /// Number of episodes ever inserted.
    pub fn inserted(&self) -> u64 {
        self.next_index
    }

    /// Stored episodes in slot order.
    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.slots.iter()
    }

    /// Looks an episode up by insertion index; `None` once evicted.
    pub fn get(&self, insertion_index: u64) -> Option<&Episode> {
        let slot = (insertion_index % self.capacity as u64) as usize;
        self.slots
            .get(slot)
            .filter(|e| e.insertion_index == insertion_index)
    }

    /// Stores an episode, evicting the oldest one when full. Returns the
    /// episode's insertion index.
    pub fn insert(&mut self, mut episode: Episode) -> Result<u64> {
        if episode.len() == 0 || episode.object_states.len() != episode.len() + 1 {
            return Err(Error::InvalidEpisode("length mismatch".into()));
        }
        let limit = EXACT_TOTAL_LIMIT / self.capacity as f64;
        if episode.trajectory_energy > limit {
            return Err(Error::InvalidEpisode(format!(
                "trajectory energy {} exceeds the per-episode limit {limit}",
                episode.trajectory_energy
            )));
        }
        if let Some(first) = self.slots.first() {
            if (first.obs_dim, first.action_dim, first.goal_dim)
                != (episode.obs_dim, episode.action_dim, episode.goal_dim)
            {
                return Err(Error::InvalidEpisode("dimensions differ from stored episodes".into()));
            }
        }
        let index = self.next_index;
        episode.insertion_index = index;
        let slot = (index % self.capacity as u64) as usize;
        let energy = episode.trajectory_energy;
        if slot < self.slots.len() {
            self.energy_sum -= self.slots[slot].trajectory_energy;
            self.slots[slot] = episode;
        } else {
            self.slots.push(episode);
        }
        self.energy_sum += energy;
        self.energy_tree.update(slot, energy)?;
        self.next_index += 1;
        Ok(index)
    }

    fn sample_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.slots.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        match self.strategy {
            SamplingStrategy::Energy if self.energy_sum > 0.0 => self.energy_tree.sample_with(rng),
            _ => Ok(rng.gen_range(0..self.slots.len())),
        }
    }

    /// Draws one episode according to the buffer's strategy.
    pub fn sample_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&Episode> {
        let slot = self.sample_slot(rng)?;
        Ok(&self.slots[slot])
    }

    /// Probability of drawing each stored episode, in slot order.
    pub fn sampling_probabilities(&self) -> Vec<f64> {
        let n = self.slots.len();
        match self.strategy {
            SamplingStrategy::Energy if self.energy_sum > 0.0 => self
                .slots
                .iter()
                .map(|e| e.trajectory_energy / self.energy_sum)
                .collect(),
            _ => vec![1.0 / n as f64; n],
        }
    }

    /// Builds a minibatch: for each row pick an episode, a uniform timestep,
    /// and with probability `her_ratio` a future achieved goal in place of
    /// the original one. Final transitions keep their original goal.
    pub fn make_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        her_ratio: f64,
        rng: &mut R,
        reward_fn: &dyn RewardFn,
    ) -> Result<Batch> {
        if !(0.0..=1.0).contains(&her_ratio) {
            return Err(Error::Config(format!("her_ratio {her_ratio} outside [0, 1]")));
        }
        let first = self.slots.first().ok_or(Error::EmptyBuffer)?;
        let mut builder = BatchBuilder::new(batch_size, first.obs_dim, first.action_dim, first.goal_dim);
        for _ in 0..batch_size {
            let episode = &self.slots[self.sample_slot(rng)?];
            let t = rng.gen_range(0..episode.len());
            let relabel = rng.gen_bool(her_ratio);
            if relabel && t + 1 < episode.len() {
                let (goal, reward) = relabel_future(episode, t, rng, reward_fn)?;
                builder.push(episode, t, &goal, reward, true);
            } else {
                builder.push(episode, t, &episode.goal, episode.rewards[t], false);
            }
        }
        Ok(builder.finish())
    }

    /// Writes one JSON line per stored episode, oldest first.
    pub fn write_episode_log(&self, path: &Path) -> Result<()> {
        let mut records: Vec<EpisodeLogRecord> = self.slots.iter().map(EpisodeLogRecord::from).collect();
        records.sort_by_key(|r| r.episode_index);
        write_episode_log(path, &records)
    }
}

/// Summary line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRecord {
    pub episode_index: u64,
    pub trajectory_energy: f64,
    pub success: bool,
    #[serde(rename = "return")]
    pub episode_return: f64,
}

impl From<&Episode> for EpisodeLogRecord {
    fn from(e: &Episode) -> Self {
        Self {
            episode_index: e.insertion_index,
            trajectory_energy: e.trajectory_energy,
            success: e.success(),
            episode_return: e.episode_return(),
        }
    }
}

pub fn write_episode_log(path: &Path, records: &[EpisodeLogRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
