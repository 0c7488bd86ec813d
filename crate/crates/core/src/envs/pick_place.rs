use rand::{Rng, RngCore};

use super::{
    clip_action, distance, planar_observation, seek, EnvSpec, EnvState, GoalEnv, GoalKind, Script,
    ScriptMemory, StepOutcome, DT, HORIZON, PLANAR_OBS_DIM, POSITION_TOLERANCE,
};
use crate::energy::ObjectState;
use crate::error::Result;

const TABLE_HALF_WIDTH: f64 = 0.15;
const GOAL_HALF_WIDTH: f64 = 0.12;
const MAX_HEIGHT: f64 = 0.25;
const GOAL_MIN_HEIGHT: f64 = 0.03;
const GOAL_MAX_HEIGHT: f64 = 0.2;
const GRASP_RADIUS: f64 = 0.03;
const MAX_STEP: f64 = 0.03;
const GRAVITY: f64 = 9.81;
/// Height at which the drop script lets go.
const DROP_HEIGHT: f64 = 0.06;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "planar-pick-place".into(),
        obs_dim: PLANAR_OBS_DIM,
        action_dim: 4,
        goal_dim: 3,
        goal_kind: GoalKind::Position,
        tolerance: POSITION_TOLERANCE,
        horizon: HORIZON,
        dt: DT,
        e_tran_max: 0.5,
        goal_low: vec![-GOAL_HALF_WIDTH, -GOAL_HALF_WIDTH, 0.0],
        goal_high: vec![GOAL_HALF_WIDTH, GOAL_HALF_WIDTH, GOAL_MAX_HEIGHT],
    }
}

/// Grasp, lift and place a small object.
///
/// Actions are `(dx, dy, dz, grip)`. A positive grip closes the gripper;
/// closing within [`GRASP_RADIUS`] of the object attaches it rigidly at its
/// current offset. Opening releases it and it falls under gravity until it
/// hits the floor. Half of the goals are in the air, so they can only be
/// reached by lifting.
#[derive(Debug, Clone)]
pub struct PlanarPickPlace {
    spec: EnvSpec,
    state: EnvState,
}

impl Default for PlanarPickPlace {
    fn default() -> Self {
        Self::new()
    }
}

impl PlanarPickPlace {
    pub fn new() -> Self {
        let object = ObjectState::at([0.0; 3]).expect("finite");
        Self {
            spec: spec(),
            state: EnvState::resting([0.0, 0.0, 0.1], object, vec![0.0; 3]),
        }
    }

    fn sample_goal(rng: &mut dyn RngCore) -> [f64; 3] {
        let x = rng.gen_range(-GOAL_HALF_WIDTH..=GOAL_HALF_WIDTH);
        let y = rng.gen_range(-GOAL_HALF_WIDTH..=GOAL_HALF_WIDTH);
        let z = if rng.gen_bool(0.5) {
            rng.gen_range(GOAL_MIN_HEIGHT..=GOAL_MAX_HEIGHT)
        } else {
            0.0
        };
        [x, y, z]
    }
}

impl GoalEnv for PlanarPickPlace {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let object = [
            rng.gen_range(-GOAL_HALF_WIDTH..=GOAL_HALF_WIDTH),
            rng.gen_range(-GOAL_HALF_WIDTH..=GOAL_HALF_WIDTH),
            0.0,
        ];
        let gripper = [
            rng.gen_range(-0.1..=0.1),
            rng.gen_range(-0.1..=0.1),
            rng.gen_range(0.02..=0.1),
        ];
        let goal = loop {
            let g = Self::sample_goal(rng);
            if distance(g, object) > self.spec.tolerance {
                break g;
            }
        };
        let object = ObjectState::at(object).expect("finite");
        self.state = EnvState::resting(gripper, object, goal.to_vec());
        (self.observation(), goal.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let (action, action_clipped) = clip_action(action, self.spec.action_dim)?;
        if action_clipped {
            log::trace!("planar-pick-place: action clipped to {action:?}");
        }
        let s = &mut self.state;
        let before = s.object.position();
        let offset = [0, 1, 2].map(|i| before[i] - s.gripper[i]);
        for i in 0..2 {
            s.gripper[i] = (s.gripper[i] + action[i] * MAX_STEP).clamp(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH);
        }
        s.gripper[2] = (s.gripper[2] + action[2] * MAX_STEP).clamp(0.0, MAX_HEIGHT);
        let closing = action[3] > 0.0;

        if s.grasped && !closing {
            s.grasped = false;
        } else if !s.grasped && closing && distance(s.gripper, before) < GRASP_RADIUS {
            s.grasped = true;
        }

        let mut after = before;
        if s.grasped {
            for i in 0..3 {
                after[i] = s.gripper[i] + offset[i];
            }
            after[2] = after[2].max(0.0);
        } else if before[2] > 0.0 || s.object_velocity[2] > 0.0 {
            let vz = s.object_velocity[2] - GRAVITY * DT;
            after[2] = before[2] + vz * DT;
            if after[2] <= 0.0 {
                after[2] = 0.0;
            }
        }
        s.object = ObjectState::at(after)?;
        s.object_velocity = [0, 1, 2].map(|i| (after[i] - before[i]) / DT);
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
        planar_observation(&self.state)
    }

    fn scripted_action(&self, script: Script, memory: &mut ScriptMemory) -> Vec<f64> {
        let s = &self.state;
        let object = s.object.position();
        let goal = [s.goal[0], s.goal[1], s.goal[2]];
        let hover = [object[0], object[1], object[2] + 0.06];
        let (target, grip) = match (script, s.grasped) {
            (Script::Untouched, _) => (hover, -1.0),
            (Script::Drop, _) if memory.released => (s.gripper, -1.0),
            (_, false) => {
                if distance(s.gripper, object) < 0.5 * GRASP_RADIUS {
                    (s.gripper, 1.0)
                } else {
                    (object, -1.0)
                }
            }
            (Script::Drop, true) => {
                if object[2] >= DROP_HEIGHT {
                    memory.released = true;
                    (s.gripper, -1.0)
                } else {
                    let toward = [
                        object[0] + 0.3 * (goal[0] - object[0]),
                        object[1] + 0.3 * (goal[1] - object[1]),
                        DROP_HEIGHT + 0.01,
                    ];
                    (toward, 1.0)
                }
            }
            (_, true) => {
                let offset = [0, 1, 2].map(|i| object[i] - s.gripper[i]);
                ([0, 1, 2].map(|i| goal[i] - offset[i]), 1.0)
            }
        };
        let a = seek(s.gripper, target, MAX_STEP);
        vec![a[0], a[1], a[2], grip]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scripted_delivery_succeeds() {
        let mut env = PlanarPickPlace::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            env.reset(&mut rng);
            let mut last = -1.0;
            let mut memory = ScriptMemory::default();
            for _ in 0..HORIZON {
                last = env.step(&env.scripted_action(Script::Deliver, &mut memory)).unwrap().reward;
            }
            assert_eq!(last, 0.0, "goal {:?} object {:?}", env.state().goal, env.state().object);
        }
    }

    #[test]
    fn released_object_falls_to_floor() {
        let mut env = PlanarPickPlace::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(&mut rng);
        let mut lifted = 0.0f64;
        let mut memory = ScriptMemory::default();
        for _ in 0..HORIZON {
            env.step(&env.scripted_action(Script::Drop, &mut memory)).unwrap();
            let z = env.state().object.position()[2];
            assert!(z >= 0.0);
            lifted = lifted.max(z);
        }
        assert!(lifted >= DROP_HEIGHT);
        assert_eq!(env.state().object.position()[2], 0.0);
        assert!(!env.state().grasped);
    }

    #[test]
    fn goals_split_between_floor_and_air() {
        let mut env = PlanarPickPlace::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let airborne = (0..n)
            .filter(|_| env.reset(&mut rng).1[2] > 0.0)
            .count() as f64
            / n as f64;
        assert!((airborne - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 0.01, "{airborne}");
    }
}
