use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::Ddpg;
use crate::energy::EnergyParams;
use crate::envs::{DeskEnv, EnvKind, GoalEnv};
use crate::error::Result;
use crate::replay::Episode;

/// Plays one full-horizon episode, asking `policy(env, obs, goal)` for
/// every action.
pub fn rollout<P>(env: &mut DeskEnv, rng: &mut dyn RngCore, params: &EnergyParams, mut policy: P) -> Result<Episode>
where
    P: FnMut(&DeskEnv, &[f64], &[f64]) -> Result<Vec<f64>>,
{
    let (obs, goal) = env.reset(rng);
    let horizon = env.spec().horizon;
    let mut observations = Vec::with_capacity(horizon + 1);
    let mut achieved = Vec::with_capacity(horizon + 1);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    observations.push(obs);
    achieved.push(env.achieved_goal());
    states.push(env.state().object);
    for _ in 0..horizon {
        let action: Vec<f64> = policy(env, observations.last().expect("non-empty"), &goal)?
            .into_iter()
            .map(|a| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        let outcome = env.step(&action)?;
        actions.push(action);
        rewards.push(outcome.reward);
        observations.push(outcome.observation);
        achieved.push(outcome.achieved_goal);
        states.push(env.state().object);
    }
    Episode::new(&observations, &actions, &rewards, &goal, &achieved, &states, params)
}

/// Fraction of `episodes` rollouts whose final reward is 0.
pub fn evaluate_policy<P>(kind: EnvKind, episodes: usize, rng: &mut dyn RngCore, mut policy: P) -> Result<f64>
where
    P: FnMut(&DeskEnv, &[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut env = kind.make();
    let params = EnergyParams::with_clip(kind.spec().e_tran_max)?;
    let mut successes = 0;
    for _ in 0..episodes {
        if rollout(&mut env, rng, &params, &mut policy)?.success() {
            successes += 1;
        }
    }
    Ok(successes as f64 / episodes.max(1) as f64)
}

/// Success rate of the agent's deterministic policy.
pub fn evaluate(agent: &Ddpg, kind: EnvKind, episodes: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    evaluate_with(agent, kind, episodes, &mut rng)
}

pub(crate) fn evaluate_with(agent: &Ddpg, kind: EnvKind, episodes: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut noise_rng = ChaCha8Rng::seed_from_u64(0);
    evaluate_policy(kind, episodes, rng, |_, obs, goal| agent.act(obs, goal, 0.0, &mut noise_rng))
}
