use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::energy::EnergyParams;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::per::PerConfig;
use crate::replay::SamplingStrategy;

/// Replay scheme used during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    UniformHer,
    PerHer,
    EbpHer,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::UniformHer, Strategy::PerHer, Strategy::EbpHer];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UniformHer => "uniform-her",
            Strategy::PerHer => "per-her",
            Strategy::EbpHer => "ebp-her",
        }
    }

    /// Episode-level sampling rule used by the replay buffer.
    pub fn sampling(self) -> SamplingStrategy {
        match self {
            Strategy::EbpHer => SamplingStrategy::Energy,
            Strategy::UniformHer | Strategy::PerHer => SamplingStrategy::Uniform,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (expected uniform-her, per-her or ebp-her)")))
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Optimizer steps after each collected episode.
    pub optim_steps: usize,
    pub batch_size: usize,
    pub eval_episodes: usize,
    pub her_ratio: f64,
    pub buffer_episodes: usize,
    pub success_threshold: f64,
    /// Relabeled copies stored per transition by the prioritized baseline.
    pub per_future_k: usize,
    pub per: PerConfig,
    pub agent: AgentConfig,
    /// Overrides the environment's transition-energy clip.
    pub e_tran_max: Option<f64>,
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
    /// Replaces every trajectory energy with this value (ablation).
    pub constant_energy: Option<f64>,
    /// 1-based epoch whose correlation is reported as the mid-training value;
    /// defaults to half the budget.
    pub correlation_epoch: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let energy = EnergyParams::default();
        Self {
            env: EnvKind::PlanarPush,
            strategy: Strategy::EbpHer,
            seeds: vec![0, 1, 2, 3, 4],
            epochs: 30,
            episodes_per_epoch: 100,
            optim_steps: 40,
            batch_size: 64,
            eval_episodes: 20,
            her_ratio: 0.8,
            buffer_episodes: 5000,
            success_threshold: 0.8,
            per_future_k: 4,
            per: PerConfig::default(),
            agent: AgentConfig::default(),
            e_tran_max: None,
            mass: energy.mass,
            gravity: energy.gravity,
            inertia: energy.inertia,
            constant_energy: None,
            correlation_epoch: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show_optional<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check(!self.seeds.is_empty(), "at least one seed is required")?;
        check(self.epochs >= 1, "epochs must be >= 1")?;
        check(self.episodes_per_epoch >= 1, "episodes_per_epoch must be >= 1")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(self.eval_episodes >= 1, "eval_episodes must be >= 1")?;
        check((0.0..=1.0).contains(&self.her_ratio), "her_ratio must be in [0, 1]")?;
        check(self.buffer_episodes >= 1, "buffer_episodes must be >= 1")?;
        check((0.0..=1.0).contains(&self.success_threshold), "success_threshold must be in [0, 1]")?;
        if let Some(c) = self.constant_energy {
            check(c.is_finite() && c >= 0.0, "constant_energy must be finite and >= 0")?;
        }
        if let Some(e) = self.correlation_epoch {
            check((1..=self.epochs).contains(&e), "correlation_epoch must be within the epoch budget")?;
        }
        self.per.validate()?;
        self.agent.validate()?;
        self.energy_params().validate()
    }

    pub fn energy_params(&self) -> EnergyParams {
        EnergyParams {
            mass: self.mass,
            gravity: self.gravity,
            inertia: self.inertia,
            dt: crate::envs::DT,
            e_tran_max: self.e_tran_max.unwrap_or(self.env.spec().e_tran_max),
        }
    }

    pub fn correlation_epoch(&self) -> usize {
        self.correlation_epoch.unwrap_or(self.epochs.div_ceil(2))
    }

    /// Environment transitions collected per epoch.
    pub fn samples_per_epoch(&self) -> u64 {
        (self.episodes_per_epoch * self.env.spec().horizon) as u64
    }

    /// Sets one field from its textual `key` and `value`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.agent;
        match key {
            "env" => self.env = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "episodes_per_epoch" => self.episodes_per_epoch = parse(key, value)?,
            "optim_steps" => self.optim_steps = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "her_ratio" => self.her_ratio = parse(key, value)?,
            "buffer_episodes" => self.buffer_episodes = parse(key, value)?,
            "success_threshold" => self.success_threshold = parse(key, value)?,
            "per_future_k" => self.per_future_k = parse(key, value)?,
            "per_alpha" => self.per.alpha = parse(key, value)?,
            "per_eps" => self.per.eps = parse(key, value)?,
            "per_new_at_max" => self.per.new_at_max = parse(key, value)?,
            "gamma" => a.gamma = parse(key, value)?,
            "tau" => a.tau = parse(key, value)?,
            "actor_lr" => a.actor_lr = parse(key, value)?,
            "critic_lr" => a.critic_lr = parse(key, value)?,
            "noise_sigma" => a.noise_sigma = parse(key, value)?,
            "random_eps" => a.random_eps = parse(key, value)?,
            "hidden" => a.hidden = parse_list(key, value)?,
            "action_bound" => a.action_bound = parse(key, value)?,
            "action_l2" => a.action_l2 = parse(key, value)?,
            "norm_clip" => a.norm_clip = parse(key, value)?,
            "e_tran_max" => self.e_tran_max = parse_optional(key, value)?,
            "mass" => self.mass = parse(key, value)?,
            "gravity" => self.gravity = parse(key, value)?,
            "inertia" => {
                let v: Vec<f64> = parse_list(key, value)?;
                self.inertia = v
                    .try_into()
                    .map_err(|_| Error::Config("inertia needs three comma-separated values".into()))?;
            }
            "constant_energy" => self.constant_energy = parse_optional(key, value)?,
            "correlation_epoch" => self.correlation_epoch = parse_optional(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values. Blank lines
    /// and `#` comments are skipped; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Every field as `key = value`, readable by [`RunConfig::from_text`].
    pub fn to_text(&self) -> String {
        let a = &self.agent;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("env", self.env.name().into());
        line("strategy", self.strategy.name().into());
        line("seeds", join(&self.seeds));
        line("epochs", self.epochs.to_string());
        line("episodes_per_epoch", self.episodes_per_epoch.to_string());
        line("optim_steps", self.optim_steps.to_string());
        line("batch_size", self.batch_size.to_string());
        line("eval_episodes", self.eval_episodes.to_string());
        line("her_ratio", self.her_ratio.to_string());
        line("buffer_episodes", self.buffer_episodes.to_string());
        line("success_threshold", self.success_threshold.to_string());
        line("per_future_k", self.per_future_k.to_string());
        line("per_alpha", self.per.alpha.to_string());
        line("per_eps", self.per.eps.to_string());
        line("per_new_at_max", self.per.new_at_max.to_string());
        line("gamma", a.gamma.to_string());
        line("tau", a.tau.to_string());
        line("actor_lr", a.actor_lr.to_string());
        line("critic_lr", a.critic_lr.to_string());
        line("noise_sigma", a.noise_sigma.to_string());
        line("random_eps", a.random_eps.to_string());
        line("hidden", join(&a.hidden));
        line("action_bound", a.action_bound.to_string());
        line("action_l2", a.action_l2.to_string());
        line("norm_clip", a.norm_clip.to_string());
        line("e_tran_max", show_optional(&self.e_tran_max));
        line("mass", self.mass.to_string());
        line("gravity", self.gravity.to_string());
        line("inertia", join(&self.inertia));
        line("constant_energy", show_optional(&self.constant_energy));
        line("correlation_epoch", show_optional(&self.correlation_epoch));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut config = RunConfig::default();
        config.env = EnvKind::RotateBlock;
        config.strategy = Strategy::PerHer;
        config.seeds = vec![3, 9];
        config.agent.critic_lr = 0.1 + 0.2;
        config.e_tran_max = Some(1.5);
        config.inertia = [1.0, 2.0, 0.5];
        let back = RunConfig::from_text(&config.to_text()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(matches!(RunConfig::from_text("colour = red"), Err(Error::Config(_))));
        assert!(RunConfig::from_text("epochs = -1").is_err());
        assert!(RunConfig::from_text("epochs = 0").is_err());
        assert!(RunConfig::from_text("eval_episodes = 0").is_err());
        assert!(RunConfig::from_text("seeds = ").is_err());
        assert!(RunConfig::from_text("strategy = her").is_err());
        assert!(RunConfig::from_text("just words").is_err());
    }

    #[test]
    fn comments_and_defaults() {
        let config = RunConfig::from_text("# desk run\nepochs = 4  # short\n\nenv = planar-pick-place\n").unwrap();
        assert_eq!(config.epochs, 4);
        assert_eq!(config.env, EnvKind::PlanarPickPlace);
        assert_eq!(config.correlation_epoch(), 2);
        assert_eq!(config.energy_params().e_tran_max, 0.5);
        assert_eq!(config.samples_per_epoch(), 5000);
    }
}
