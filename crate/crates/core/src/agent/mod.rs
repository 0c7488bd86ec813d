//! Goal-conditioned DDPG.
//!
//! The actor maps `obs || goal` to an action through a tanh head; the
//! critic maps `obs || goal || action` to a scalar value. Inputs are
//! standardized by running normalizers. Updates are plain gradient steps.

mod checkpoint;
mod mlp;
mod normalizer;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Activation, Gradients, Mlp, Trace};
pub use normalizer::Normalizer;

use crate::error::{Error, Result};
use crate::replay::{Batch, Episode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Gaussian exploration noise, as a fraction of the action bound.
    pub noise_sigma: f64,
    /// Probability of taking a uniformly random action while exploring.
    pub random_eps: f64,
    pub hidden: Vec<usize>,
    pub action_bound: f64,
    /// Weight of the `mean(a^2)` penalty added to the actor loss.
    pub action_l2: f64,
    pub norm_clip: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            tau: 0.05,
            actor_lr: 0.01,
            critic_lr: 0.01,
            noise_sigma: 0.2,
            random_eps: 0.2,
            hidden: vec![64, 64],
            action_bound: 1.0,
            action_l2: 1.0,
            norm_clip: 5.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check((0.0..1.0).contains(&self.gamma), "gamma must be in [0, 1)")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau must be in (0, 1]")?;
        check(self.actor_lr > 0.0 && self.critic_lr > 0.0, "learning rates must be positive")?;
        check(self.noise_sigma >= 0.0, "noise_sigma must be >= 0")?;
        check((0.0..=1.0).contains(&self.random_eps), "random_eps must be in [0, 1]")?;
        check(self.action_bound > 0.0, "action_bound must be positive")?;
        check(self.action_l2 >= 0.0, "action_l2 must be >= 0")?;
        check(self.norm_clip > 0.0, "norm_clip must be positive")?;
        check(!self.hidden.is_empty() && !self.hidden.contains(&0), "hidden sizes must be positive")
    }
}

/// Bootstrapped target `r + gamma * q_next`, clipped to `[-1 / (1 - gamma), 0]`.
pub fn td_target(reward: f64, q_next: f64, gamma: f64) -> f64 {
    (reward + gamma * q_next).clamp(-1.0 / (1.0 - gamma), 0.0)
}

/// Mean squared TD loss of `critic` on `inputs` (`obs || goal || action`).
/// Returns the loss, its gradients and the per-sample errors `Q - y`.
pub fn critic_loss_and_gradients(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
) -> Result<(f64, Gradients, Vec<f64>)> {
    if inputs.nrows() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!("{} inputs for {} targets", inputs.nrows(), targets.len())));
    }
    let trace = critic.forward_trace(inputs)?;
    let q = trace.output();
    let n = targets.len() as f64;
    let td: Vec<f64> = q.column(0).iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = td.iter().map(|d| d * d).sum::<f64>() / n;
    let grad_q = Array2::from_shape_fn((td.len(), 1), |(i, _)| 2.0 * td[i] / n);
    let (grads, _) = critic.backward(&trace, grad_q.view())?;
    Ok((loss, grads, td))
}

/// Actor loss `-mean Q(x, pi(x)) + l2 * mean(pi(x)^2)` and its gradients with
/// respect to the actor. `inputs` is `obs || goal`.
pub fn actor_loss_and_gradients(
    actor: &Mlp,
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    action_bound: f64,
    action_l2: f64,
) -> Result<(f64, Gradients)> {
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::Shape("empty actor batch".into()));
    }
    let action_dim = actor.output_dim();
    let actor_trace = actor.forward_trace(inputs)?;
    let actions = actor_trace.output() * action_bound;
    let critic_in = concatenate![Axis(1), inputs, actions.view()];
    let critic_trace = critic.forward_trace(critic_in.view())?;
    let q = critic_trace.output();
    let nf = n as f64;
    let penalty_scale = action_l2 / (nf * action_dim as f64);
    let loss = -q.sum() / nf + penalty_scale * actions.iter().map(|a| a * a).sum::<f64>();

    let grad_q = Array2::from_elem((n, 1), -1.0 / nf);
    let (_, grad_critic_in) = critic.backward(&critic_trace, grad_q.view())?;
    let mut grad_actions = mlp::trailing_columns(&grad_critic_in, action_dim);
    grad_actions.zip_mut_with(&actions, |g, &a| *g += 2.0 * penalty_scale * a);
    grad_actions *= action_bound;
    let (grads, _) = actor.backward(&actor_trace, grad_actions.view())?;
    Ok((loss, grads))
}

/// Losses and TD errors from one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub td_errors: Vec<f64>,
}

/// Actor, critic, their Polyak-averaged targets and the input normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddpg {
    config: AgentConfig,
    obs_dim: usize,
    goal_dim: usize,
    action_dim: usize,
    pub(crate) actor: Mlp,
    pub(crate) critic: Mlp,
    pub(crate) actor_target: Mlp,
    pub(crate) critic_target: Mlp,
    pub(crate) obs_norm: Normalizer,
    pub(crate) goal_norm: Normalizer,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

impl Ddpg {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        goal_dim: usize,
        action_dim: usize,
        config: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let input = obs_dim + goal_dim;
        let actor = Mlp::new(&layer_sizes(input, &config.hidden, action_dim), Activation::Tanh, rng)?;
        let critic = Mlp::new(&layer_sizes(input + action_dim, &config.hidden, 1), Activation::Identity, rng)?;
        Ok(Self {
            obs_norm: Normalizer::new(obs_dim, config.norm_clip),
            goal_norm: Normalizer::new(goal_dim, config.norm_clip),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            config,
            obs_dim,
            goal_dim,
            action_dim,
        })
    }

    pub(crate) fn from_parts(
        config: AgentConfig,
        nets: [Mlp; 4],
        obs_norm: Normalizer,
        goal_norm: Normalizer,
    ) -> Result<Self> {
        let [actor, critic, actor_target, critic_target] = nets;
        let obs_dim = obs_norm.dim();
        let goal_dim = goal_norm.dim();
        let action_dim = actor.output_dim();
        if actor.input_dim() != obs_dim + goal_dim
            || critic.input_dim() != obs_dim + goal_dim + action_dim
            || actor_target.sizes() != actor.sizes()
            || critic_target.sizes() != critic.sizes()
        {
            return Err(Error::Checkpoint("network sizes are inconsistent".into()));
        }
        Ok(Self { config, obs_dim, goal_dim, action_dim, actor, critic, actor_target, critic_target, obs_norm, goal_norm })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn goal_dim(&self) -> usize {
        self.goal_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Normalized `obs || goal` rows.
    pub fn actor_inputs(&self, obs: ArrayView2<f64>, goals: ArrayView2<f64>) -> Result<Array2<f64>> {
        if obs.nrows() != goals.nrows() {
            return Err(Error::Shape(format!("{} observations for {} goals", obs.nrows(), goals.nrows())));
        }
        let o = self.obs_norm.normalize(obs)?;
        let g = self.goal_norm.normalize(goals)?;
        Ok(concatenate![Axis(1), o, g])
    }

    fn scaled_policy(&self, net: &Mlp, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(net.forward(inputs)? * self.config.action_bound)
    }

    /// Policy action plus Gaussian noise of `noise_scale` times the action
    /// bound, clipped to the bounds. Zero noise gives the deterministic policy.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], goal: &[f64], noise_scale: f64, rng: &mut R) -> Result<Vec<f64>> {
        let o = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::Shape(e.to_string()))?;
        let g = ArrayView2::from_shape((1, goal.len()), goal).map_err(|e| Error::Shape(e.to_string()))?;
        let inputs = self.actor_inputs(o, g)?;
        let action = self.scaled_policy(&self.actor, inputs.view())?;
        let bound = self.config.action_bound;
        let mut out: Vec<f64> = action.iter().copied().collect();
        if noise_scale > 0.0 {
            let normal = Normal::new(0.0, noise_scale * bound).map_err(|e| Error::Config(e.to_string()))?;
            for a in &mut out {
                *a += normal.sample(rng);
            }
        }
        Ok(out.into_iter().map(|a| a.clamp(-bound, bound)).collect())
    }

    /// Behavior policy: a uniformly random action with probability
    /// `random_eps`, otherwise the noisy policy.
    pub fn explore<R: Rng + ?Sized>(&self, obs: &[f64], goal: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let bound = self.config.action_bound;
        if rng.gen_bool(self.config.random_eps) {
            return Ok((0..self.action_dim).map(|_| rng.gen_range(-bound..bound)).collect());
        }
        self.act(obs, goal, self.config.noise_sigma, rng)
    }

    /// Feeds every observation and goal of an episode to the normalizers.
    pub fn update_normalizers(&mut self, episode: &Episode) -> Result<()> {
        for t in 0..=episode.len() {
            self.obs_norm.update(episode.observation(t))?;
            self.goal_norm.update(episode.achieved_goal(t))?;
        }
        self.goal_norm.update(episode.goal())
    }

    fn critic_inputs(&self, actor_inputs: &Array2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
        concatenate![Axis(1), actor_inputs.view(), actions]
    }

    /// Clipped bootstrapped targets from the target networks.
    pub fn td_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next = self.actor_inputs(batch.next_obs.view(), batch.goals.view())?;
        let next_actions = self.scaled_policy(&self.actor_target, next.view())?;
        let q_next = self.critic_target.forward(self.critic_inputs(&next, next_actions.view()).view())?;
        Ok(batch
            .rewards
            .iter()
            .zip(q_next.column(0))
            .map(|(&r, &q)| td_target(r, q, self.config.gamma))
            .collect())
    }

    /// TD errors `Q(s, a, g) - y` without changing any parameters.
    pub fn td_errors(&self, batch: &Batch) -> Result<Vec<f64>> {
        let targets = self.td_targets(batch)?;
        let inputs = self.actor_inputs(batch.obs.view(), batch.goals.view())?;
        let q = self.critic.forward(self.critic_inputs(&inputs, batch.actions.view()).view())?;
        Ok(q.column(0).iter().zip(&targets).map(|(q, y)| q - y).collect())
    }

    /// One gradient step on the critic. Returns the pre-step loss and TD errors.
    pub fn critic_update(&mut self, batch: &Batch, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let inputs = self.actor_inputs(batch.obs.view(), batch.goals.view())?;
        let critic_in = self.critic_inputs(&inputs, batch.actions.view());
        let (loss, grads, td) = critic_loss_and_gradients(&self.critic, critic_in.view(), targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("critic loss {loss}")));
        }
        self.critic.apply_gradients(&grads, self.config.critic_lr)?;
        Ok((loss, td))
    }

    /// One gradient step on the actor through the (unchanged) critic.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let inputs = self.actor_inputs(batch.obs.view(), batch.goals.view())?;
        let (loss, grads) = actor_loss_and_gradients(
            &self.actor,
            &self.critic,
            inputs.view(),
            self.config.action_bound,
            self.config.action_l2,
        )?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("actor loss {loss}")));
        }
        self.actor.apply_gradients(&grads, self.config.actor_lr)?;
        Ok(loss)
    }

    /// Moves both target networks toward the live ones by `tau`.
    pub fn polyak_update(&mut self) -> Result<()> {
        self.actor_target.polyak_from(&self.actor, self.config.tau)?;
        self.critic_target.polyak_from(&self.critic, self.config.tau)
    }

    /// Critic step, actor step, then target averaging.
    pub fn train_step(&mut self, batch: &Batch) -> Result<StepStats> {
        let targets = self.td_targets(batch)?;
        let (critic_loss, td_errors) = self.critic_update(batch, &targets)?;
        let actor_loss = self.actor_update(batch)?;
        self.polyak_update()?;
        Ok(StepStats { critic_loss, actor_loss, td_errors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize, obs: usize, goal: usize, act: usize) -> Batch {
        Batch {
            obs: random_matrix(rng, n, obs),
            actions: random_matrix(rng, n, act),
            rewards: (0..n).map(|_| if rng.gen_bool(0.5) { 0.0 } else { -1.0 }).collect(),
            next_obs: random_matrix(rng, n, obs),
            goals: random_matrix(rng, n, goal),
            episode_ids: vec![0; n],
            timesteps: vec![0; n],
            relabeled: vec![false; n],
        }
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(0.0, 0.0, 0.98), 0.0);
        assert_eq!(td_target(-1.0, 0.0, 0.98), -1.0);
        let y = td_target(-1.0, -50.0, 0.98);
        assert!((y - -50.0).abs() < 1e-12);
        assert!(y >= -1.0 / (1.0 - 0.98));
        assert_eq!(td_target(-1.0, -1000.0, 0.98), -1.0 / (1.0 - 0.98));
        assert_eq!(td_target(0.0, 5.0, 0.98), 0.0);
    }

    #[test]
    fn deterministic_and_bounded_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = Ddpg::new(5, 3, 2, AgentConfig::default(), &mut rng).unwrap();
        let obs = [0.1, -0.2, 0.3, 0.0, 1.0];
        let goal = [0.5, 0.5, 0.0];
        let a = agent.act(&obs, &goal, 0.0, &mut rng).unwrap();
        assert_eq!(a, agent.act(&obs, &goal, 0.0, &mut rng).unwrap());
        for _ in 0..10_000 {
            let o: Vec<f64> = (0..5).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let noisy = agent.act(&o, &g, 3.0, &mut rng).unwrap();
            assert!(noisy.iter().all(|v| v.abs() <= 1.0));
            let explored = agent.explore(&o, &g, &mut rng).unwrap();
            assert!(explored.iter().all(|v| v.abs() <= 1.0));
        }
        assert!(matches!(agent.act(&obs[..4], &goal, 0.0, &mut rng), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_weights_give_zero_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = Ddpg::new(4, 3, 2, AgentConfig::default(), &mut rng).unwrap();
        agent.actor = Mlp::zeros(agent.actor.sizes(), Activation::Tanh).unwrap();
        assert_eq!(agent.act(&[1.0; 4], &[2.0; 3], 0.0, &mut rng).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn matching_targets_leave_critic_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = Ddpg::new(4, 3, 2, AgentConfig::default(), &mut rng).unwrap();
        let b = batch(&mut rng, 16, 4, 3, 2);
        let inputs = agent.actor_inputs(b.obs.view(), b.goals.view()).unwrap();
        let q = agent.critic.forward(agent.critic_inputs(&inputs, b.actions.view()).view()).unwrap();
        let targets: Vec<f64> = q.column(0).to_vec();
        let before = agent.critic.clone();
        let (loss, td) = agent.critic_update(&b, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(td.iter().all(|&d| d == 0.0));
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = AgentConfig { critic_lr: 0.05, ..AgentConfig::default() };
        let mut agent = Ddpg::new(4, 3, 2, config, &mut rng).unwrap();
        let b = batch(&mut rng, 32, 4, 3, 2);
        let targets: Vec<f64> = (0..32).map(|_| rng.gen_range(-5.0..0.0)).collect();
        let first = agent.critic_update(&b, &targets).unwrap().0;
        let mut last = first;
        for _ in 0..100 {
            last = agent.critic_update(&b, &targets).unwrap().0;
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn constant_critic_gives_zero_actor_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = Mlp::new(&[5, 8, 2], Activation::Tanh, &mut rng).unwrap();
        let mut critic = Mlp::zeros(&[7, 8, 1], Activation::Identity).unwrap();
        let mut params = critic.flat_params();
        *params.last_mut().unwrap() = -3.0;
        critic.set_flat_params(&params).unwrap();
        let x = random_matrix(&mut rng, 10, 5);
        let (loss, grads) = actor_loss_and_gradients(&actor, &critic, x.view(), 1.0, 0.0).unwrap();
        assert_eq!(loss, 3.0);
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn actor_update_leaves_critic_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = Ddpg::new(4, 3, 2, AgentConfig::default(), &mut rng).unwrap();
        let b = batch(&mut rng, 16, 4, 3, 2);
        let critic = agent.critic.clone();
        let actor = agent.actor.clone();
        agent.actor_update(&b).unwrap();
        assert_eq!(agent.critic, critic);
        assert_ne!(agent.actor, actor);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut agent = Ddpg::new(4, 3, 2, AgentConfig::default(), &mut rng).unwrap();
            for _ in 0..20 {
                let b = batch(&mut rng, 8, 4, 3, 2);
                agent.train_step(&b).unwrap();
            }
            agent
        };
        let (a, b) = (run(), run());
        assert_eq!(a.actor.flat_params(), b.actor.flat_params());
        assert_eq!(a.critic_target.flat_params(), b.critic_target.flat_params());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for config in [
            AgentConfig { gamma: 1.0, ..AgentConfig::default() },
            AgentConfig { tau: 0.0, ..AgentConfig::default() },
            AgentConfig { hidden: vec![], ..AgentConfig::default() },
        ] {
            assert!(matches!(Ddpg::new(2, 2, 1, config, &mut rng), Err(Error::Config(_))));
        }
    }
}
