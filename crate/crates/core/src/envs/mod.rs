//! Desk-scale multi-goal environments.
//!
//! Each environment exposes the object it manipulates as an
//! [`ObjectState`], emits sparse rewards (`0` inside the goal tolerance,
//! `-1` outside) and is fully deterministic given the reset RNG and the
//! action sequence. Motion is kinematic: the gripper moves by the commanded
//! displacement and drags, pushes or spins the object, so work done by the
//! robot shows up as an increase in the object's energy.

mod pick_place;
mod push;
mod rotate;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::energy::ObjectState;
use crate::error::{Error, Result};
use crate::quat;

pub use pick_place::PlanarPickPlace;
pub use push::PlanarPush;
pub use rotate::RotateBlock;

/// Sampling interval shared by every desk environment, in seconds.
pub const DT: f64 = 0.04;
/// Episode length shared by every desk environment.
pub const HORIZON: usize = 50;
pub const POSITION_TOLERANCE: f64 = 0.05;
pub const ORIENTATION_TOLERANCE: f64 = 0.1;

/// What part of the object state a goal constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalKind {
    /// Goal is a 3-vector position; distance is Euclidean (meters).
    Position,
    /// Goal is a unit quaternion; distance is the geodesic angle (radians).
    Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
    pub goal_kind: GoalKind,
    pub tolerance: f64,
    pub horizon: usize,
    pub dt: f64,
    /// Default transition-energy ceiling for this environment.
    pub e_tran_max: f64,
    /// Inclusive per-component bounds of sampled goals.
    pub goal_low: Vec<f64>,
    pub goal_high: Vec<f64>,
}

impl EnvSpec {
    /// The goal vector an object state achieves.
    pub fn goal_of(&self, object: &ObjectState) -> Vec<f64> {
        match self.goal_kind {
            GoalKind::Position => object.position().to_vec(),
            GoalKind::Orientation => object.orientation().to_vec(),
        }
    }

    /// Distance between two goal vectors under this spec's metric.
    pub fn goal_distance(&self, achieved: &[f64], desired: &[f64]) -> Result<f64> {
        if achieved.len() != self.goal_dim || desired.len() != self.goal_dim {
            return Err(Error::Shape(format!(
                "goal vectors of length {} and {}, expected {}",
                achieved.len(),
                desired.len(),
                self.goal_dim
            )));
        }
        Ok(match self.goal_kind {
            GoalKind::Position => achieved
                .iter()
                .zip(desired)
                .map(|(a, d)| (a - d) * (a - d))
                .sum::<f64>()
                .sqrt(),
            GoalKind::Orientation => {
                let a = quat::normalize([achieved[0], achieved[1], achieved[2], achieved[3]]);
                let d = quat::normalize([desired[0], desired[1], desired[2], desired[3]]);
                quat::geodesic_angle(a, d)
            }
        })
    }

    pub fn is_success(&self, achieved: &[f64], desired: &[f64]) -> Result<bool> {
        Ok(self.goal_distance(achieved, desired)? <= self.tolerance)
    }
}

/// Sparse reward: `0` when `achieved` is within tolerance of `desired`,
/// `-1` otherwise.
pub fn compute_reward(achieved: &[f64], desired: &[f64], spec: &EnvSpec) -> Result<f64> {
    Ok(if spec.is_success(achieved, desired)? { 0.0 } else { -1.0 })
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub gripper: [f64; 3],
    pub object: ObjectState,
    /// Finite-difference object velocity over the last step (m/s).
    pub object_velocity: [f64; 3],
    /// World-frame angular velocity of the object (rad/s).
    pub angular_velocity: [f64; 3],
    pub grasped: bool,
    pub goal: Vec<f64>,
    pub t: usize,
}

impl EnvState {
    fn resting(gripper: [f64; 3], object: ObjectState, goal: Vec<f64>) -> Self {
        Self {
            gripper,
            object,
            object_velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            grasped: false,
            goal,
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub achieved_goal: Vec<f64>,
    /// Whether any action component had to be clipped into `[-1, 1]`.
    pub action_clipped: bool,
}

/// Hand-written controllers used to generate reference episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    /// Solve the task.
    Deliver,
    /// Reach toward the object but never move it.
    Untouched,
    /// Pick the object up and let go before reaching the goal.
    Drop,
}

/// Per-episode state of a scripted controller; reset it with the episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScriptMemory {
    pub released: bool,
}

/// Interface shared by all desk environments.
pub trait GoalEnv {
    fn spec(&self) -> &EnvSpec;

    fn state(&self) -> &EnvState;

    /// Samples an initial state and a goal; returns `(observation, goal)`.
    fn reset(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>);

    /// Applies an action with components in `[-1, 1]`. Out-of-range
    /// components are clipped; only a wrong action length is an error.
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    fn observation(&self) -> Vec<f64>;

    /// Action of the built-in scripted controller in the current state.
    /// `memory` carries controller state across steps of one episode.
    fn scripted_action(&self, script: Script, memory: &mut ScriptMemory) -> Vec<f64>;

    fn achieved_goal(&self) -> Vec<f64> {
        self.spec().goal_of(&self.state().object)
    }
}

/// The environment roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    PlanarPush,
    PlanarPickPlace,
    RotateBlock,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::PlanarPush, EnvKind::PlanarPickPlace, EnvKind::RotateBlock];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PlanarPush => "planar-push",
            EnvKind::PlanarPickPlace => "planar-pick-place",
            EnvKind::RotateBlock => "rotate-block",
        }
    }

    pub fn make(self) -> DeskEnv {
        match self {
            EnvKind::PlanarPush => DeskEnv::Push(PlanarPush::new()),
            EnvKind::PlanarPickPlace => DeskEnv::PickPlace(PlanarPickPlace::new()),
            EnvKind::RotateBlock => DeskEnv::Rotate(RotateBlock::new()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::PlanarPush => push::spec(),
            EnvKind::PlanarPickPlace => pick_place::spec(),
            EnvKind::RotateBlock => rotate::spec(),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "planarpush" | "push" => Ok(EnvKind::PlanarPush),
            "planarpickplace" | "pickplace" | "pickandplace" => Ok(EnvKind::PlanarPickPlace),
            "rotateblock" | "rotate" => Ok(EnvKind::RotateBlock),
            _ => Err(Error::Config(format!("unknown environment {s:?}"))),
        }
    }
}

/// Static dispatch over the roster.
#[derive(Debug, Clone)]
pub enum DeskEnv {
    Push(PlanarPush),
    PickPlace(PlanarPickPlace),
    Rotate(RotateBlock),
}

macro_rules! dispatch {
    ($self:ident, $env:ident => $body:expr) => {
        match $self {
            DeskEnv::Push($env) => $body,
            DeskEnv::PickPlace($env) => $body,
            DeskEnv::Rotate($env) => $body,
        }
    };
}

impl GoalEnv for DeskEnv {
    fn spec(&self) -> &EnvSpec {
        dispatch!(self, env => env.spec())
    }

    fn state(&self) -> &EnvState {
        dispatch!(self, env => env.state())
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        dispatch!(self, env => env.reset(rng))
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        dispatch!(self, env => env.step(action))
    }

    fn observation(&self) -> Vec<f64> {
        dispatch!(self, env => env.observation())
    }

    fn scripted_action(&self, script: Script, memory: &mut ScriptMemory) -> Vec<f64> {
        dispatch!(self, env => env.scripted_action(script, memory))
    }
}

/// Clips each component into `[-1, 1]`, reporting whether anything changed.
/// Non-finite components become 0.
pub(crate) fn clip_action(action: &[f64], expected: usize) -> Result<(Vec<f64>, bool)> {
    if action.len() != expected {
        return Err(Error::Shape(format!(
            "action of length {}, expected {expected}",
            action.len()
        )));
    }
    let mut clipped = false;
    let out = action
        .iter()
        .map(|&a| {
            let c = if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 };
            clipped |= c != a;
            c
        })
        .collect();
    Ok((out, clipped))
}

/// Shared observation layout of the planar environments:
/// gripper, object, object minus gripper, object velocity, grasp flag.
pub(crate) fn planar_observation(state: &EnvState) -> Vec<f64> {
    let g = state.gripper;
    let o = state.object.position();
    let v = state.object_velocity;
    let mut obs = Vec::with_capacity(13);
    obs.extend_from_slice(&g);
    obs.extend_from_slice(&o);
    obs.extend((0..3).map(|i| o[i] - g[i]));
    obs.extend(v.iter().map(|x| x * DT));
    obs.push(if state.grasped { 1.0 } else { 0.0 });
    obs
}

pub(crate) const PLANAR_OBS_DIM: usize = 13;

pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<f64>().sqrt()
}

/// Proportional controller toward `target`. Saturation rescales the whole
/// command so the heading is preserved.
pub(crate) fn seek(from: [f64; 3], target: [f64; 3], max_step: f64) -> [f64; 3] {
    let raw = [0, 1, 2].map(|i| (target[i] - from[i]) / max_step);
    let peak = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    raw.map(|v| v / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::from_axis_angle;

    #[test]
    fn reward_boundaries() {
        let spec = EnvKind::PlanarPush.spec();
        let g = [0.1, -0.05, 0.0];
        assert_eq!(compute_reward(&g, &g, &spec).unwrap(), 0.0);
        let inside = [0.1 + spec.tolerance - 1e-9, -0.05, 0.0];
        assert_eq!(compute_reward(&inside, &g, &spec).unwrap(), 0.0);
        let outside = [0.1 + spec.tolerance + 1e-9, -0.05, 0.0];
        assert_eq!(compute_reward(&outside, &g, &spec).unwrap(), -1.0);
        assert!(matches!(compute_reward(&g[..2], &g, &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn orientation_reward_uses_geodesic_angle() {
        let spec = EnvKind::RotateBlock.spec();
        let goal = from_axis_angle([0.0, 0.0, 1.0], 1.0);
        let near = quat::mul(from_axis_angle([1.0, 0.0, 0.0], 0.05), goal);
        let far = quat::mul(from_axis_angle([0.0, 1.0, 0.0], 0.15), goal);
        // oracle: angle of the relative rotation
        let rel = quat::mul(near, quat::conj(goal));
        assert!((2.0 * rel[0].abs().acos() - 0.05).abs() < 1e-9);
        assert_eq!(compute_reward(&near, &goal, &spec).unwrap(), 0.0);
        assert_eq!(compute_reward(&far, &goal, &spec).unwrap(), -1.0);
        let flipped = near.map(|v| -v);
        assert_eq!(compute_reward(&flipped, &goal, &spec).unwrap(), 0.0);
    }

    #[test]
    fn env_names_parse() {
        for kind in EnvKind::ALL {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
        }
        assert_eq!("PlanarPickPlace".parse::<EnvKind>().unwrap(), EnvKind::PlanarPickPlace);
        assert!("cartpole".parse::<EnvKind>().is_err());
    }

    #[test]
    fn clip_reports_changes() {
        let (a, clipped) = clip_action(&[0.5, -2.0], 2).unwrap();
        assert_eq!(a, vec![0.5, -1.0]);
        assert!(clipped);
        let (_, clipped) = clip_action(&[0.5, -1.0], 2).unwrap();
        assert!(!clipped);
        assert!(clip_action(&[0.0], 2).is_err());
    }
}
