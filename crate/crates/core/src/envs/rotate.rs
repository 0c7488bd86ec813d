use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{
    clip_action, EnvSpec, EnvState, GoalEnv, GoalKind, Script, ScriptMemory, StepOutcome, DT, HORIZON,
    ORIENTATION_TOLERANCE,
};
use crate::energy::ObjectState;
use crate::error::Result;
use crate::quat;

const CENTER: [f64; 3] = [0.0, 0.0, 0.05];
/// Angular acceleration at full action, rad/s^2.
const MAX_ANGULAR_ACCEL: f64 = 50.0;
const MAX_ANGULAR_SPEED: f64 = 5.0;
/// Fraction of angular velocity kept from one step to the next.
const DAMPING: f64 = 0.8;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "rotate-block".into(),
        obs_dim: 7,
        action_dim: 3,
        goal_dim: 4,
        goal_kind: GoalKind::Orientation,
        tolerance: ORIENTATION_TOLERANCE,
        horizon: HORIZON,
        dt: DT,
        e_tran_max: 2.5,
        goal_low: vec![-1.0; 4],
        goal_high: vec![1.0; 4],
    }
}

/// A block held in place and spun by torque-like actions.
///
/// Each action component accelerates the world-frame angular velocity about
/// one axis; velocity is damped every step. Goals are random turns about
/// the vertical axis, and the whole orientation must match within the
/// tolerance. Position never changes, so all energy is rotational.
#[derive(Debug, Clone)]
pub struct RotateBlock {
    spec: EnvSpec,
    state: EnvState,
}

impl Default for RotateBlock {
    fn default() -> Self {
        Self::new()
    }
}

impl RotateBlock {
    pub fn new() -> Self {
        let object = ObjectState::at(CENTER).expect("finite");
        Self {
            spec: spec(),
            state: EnvState::resting(CENTER, object, quat::IDENTITY.to_vec()),
        }
    }

    fn yaw(rng: &mut dyn RngCore) -> quat::Quat {
        quat::from_axis_angle([0.0, 0.0, 1.0], rng.gen_range(-PI..PI))
    }
}

impl GoalEnv for RotateBlock {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let start = Self::yaw(rng);
        let goal = loop {
            let g = Self::yaw(rng);
            if quat::geodesic_angle(g, start) > self.spec.tolerance {
                break g;
            }
        };
        let object = ObjectState::new(CENTER, start).expect("finite");
        self.state = EnvState::resting(CENTER, object, goal.to_vec());
        (self.observation(), goal.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let (action, action_clipped) = clip_action(action, self.spec.action_dim)?;
        if action_clipped {
            log::trace!("rotate-block: action clipped to {action:?}");
        }
        let s = &mut self.state;
        let mut omega = [0, 1, 2].map(|i| DAMPING * s.angular_velocity[i] + action[i] * MAX_ANGULAR_ACCEL * DT);
        let speed = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
        if speed > MAX_ANGULAR_SPEED {
            omega = omega.map(|w| w * MAX_ANGULAR_SPEED / speed);
        }
        let turn = quat::from_rotation_vector(omega.map(|w| w * DT));
        let orientation = quat::normalize(quat::mul(turn, s.object.orientation()));
        s.angular_velocity = omega;
        s.object = ObjectState::new(CENTER, orientation)?;
        s.t += 1;

        let achieved = self.spec.goal_of(&s.object);
        let reward = super::compute_reward(&achieved, &s.goal, &self.spec)?;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.state.t >= self.spec.horizon,
            achieved_goal: achieved,
            action_clipped,
        })
    }

    fn observation(&self) -> Vec<f64> {
        let mut q = self.state.object.orientation();
        if q[0] < 0.0 {
            q = q.map(|v| -v);
        }
        let mut obs = q.to_vec();
        obs.extend(self.state.angular_velocity.iter().map(|w| w * DT));
        obs
    }

    fn scripted_action(&self, script: Script, _memory: &mut ScriptMemory) -> Vec<f64> {
        let s = &self.state;
        match script {
            Script::Untouched => vec![0.0; 3],
            Script::Deliver | Script::Drop => {
                let goal = quat::normalize([s.goal[0], s.goal[1], s.goal[2], s.goal[3]]);
                let error = quat::to_rotation_vector(quat::mul(goal, quat::conj(s.object.orientation())));
                // Drop spins halfway and coasts.
                let gain = if script == Script::Drop { 0.5 } else { 1.0 };
                // velocity that closes the error over ~3 steps
                (0..3)
                    .map(|i| {
                        let desired = gain * error[i] / (3.0 * DT);
                        ((desired - DAMPING * s.angular_velocity[i]) / (MAX_ANGULAR_ACCEL * DT)).clamp(-1.0, 1.0)
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{trajectory_energy, EnergyParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scripted_spin_reaches_goal() {
        let mut env = RotateBlock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = EnergyParams::with_clip(2.5).unwrap();
        for _ in 0..50 {
            env.reset(&mut rng);
            let mut states = vec![env.state().object];
            let mut last = -1.0;
            let mut memory = ScriptMemory::default();
            for _ in 0..HORIZON {
                last = env.step(&env.scripted_action(Script::Deliver, &mut memory)).unwrap().reward;
                states.push(env.state().object);
            }
            assert_eq!(last, 0.0);
            assert!(trajectory_energy(&states, &params).unwrap() > 0.0);
        }
    }

    #[test]
    fn idle_block_does_not_move() {
        let mut env = RotateBlock::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        env.reset(&mut rng);
        let start = env.state().object;
        for _ in 0..HORIZON {
            assert_eq!(env.step(&[0.0; 3]).unwrap().reward, -1.0);
        }
        assert_eq!(env.state().object, start);
    }
}
