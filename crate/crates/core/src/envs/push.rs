use rand::{Rng, RngCore};

use super::{
    clip_action, distance, planar_observation, seek, EnvSpec, EnvState, GoalEnv, GoalKind, Script,
    ScriptMemory, StepOutcome, DT, HORIZON, PLANAR_OBS_DIM, POSITION_TOLERANCE,
};
use crate::energy::ObjectState;
use crate::error::Result;

const TABLE_HALF_WIDTH: f64 = 0.15;
const GOAL_HALF_WIDTH: f64 = 0.12;
const OBJECT_RADIUS: f64 = 0.025;
const GRIPPER_RADIUS: f64 = 0.015;
const MAX_STEP: f64 = 0.03;
/// The gripper may travel past the table edge to get behind the object.
const GRIPPER_LIMIT: f64 = 0.18;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "planar-push".into(),
        obs_dim: PLANAR_OBS_DIM,
        action_dim: 2,
        goal_dim: 3,
        goal_kind: GoalKind::Position,
        tolerance: POSITION_TOLERANCE,
        horizon: HORIZON,
        dt: DT,
        e_tran_max: 0.5,
        goal_low: vec![-GOAL_HALF_WIDTH, -GOAL_HALF_WIDTH, 0.0],
        goal_high: vec![GOAL_HALF_WIDTH, GOAL_HALF_WIDTH, 0.0],
    }
}

/// A disk on the floor pushed by a round gripper moving in the plane.
///
/// The object only moves while the gripper overlaps it, and is then pushed
/// out along the line of centers. It never leaves the floor, so all of its
/// energy is kinetic.
#[derive(Debug, Clone)]
pub struct PlanarPush {
    spec: EnvSpec,
    state: EnvState,
}

impl Default for PlanarPush {
    fn default() -> Self {
        Self::new()
    }
}

impl PlanarPush {
    pub fn new() -> Self {
        let object = ObjectState::at([0.0; 3]).expect("finite");
        Self {
            spec: spec(),
            state: EnvState::resting([0.1, 0.0, 0.0], object, vec![0.0; 3]),
        }
    }

    fn contact_distance() -> f64 {
        OBJECT_RADIUS + GRIPPER_RADIUS
    }
}

fn planar(rng: &mut dyn RngCore, half_width: f64) -> [f64; 3] {
    [
        rng.gen_range(-half_width..=half_width),
        rng.gen_range(-half_width..=half_width),
        0.0,
    ]
}

impl GoalEnv for PlanarPush {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> (Vec<f64>, Vec<f64>) {
        let object = planar(rng, GOAL_HALF_WIDTH);
        let gripper = loop {
            let g = planar(rng, TABLE_HALF_WIDTH);
            if distance(g, object) > Self::contact_distance() + 0.01 {
                break g;
            }
        };
        let goal = loop {
            let g = planar(rng, GOAL_HALF_WIDTH);
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
            log::trace!("planar-push: action clipped to {action:?}");
        }
        let s = &mut self.state;
        let limit = GRIPPER_LIMIT;
        for (i, a) in action.iter().enumerate() {
            s.gripper[i] = (s.gripper[i] + a * MAX_STEP).clamp(-limit, limit);
        }

        let before = s.object.position();
        let mut after = before;
        let rel = [before[0] - s.gripper[0], before[1] - s.gripper[1]];
        let gap = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
        let reach = Self::contact_distance();
        if gap < reach {
            let dir = if gap > 1e-9 {
                [rel[0] / gap, rel[1] / gap]
            } else {
                let n = (action[0] * action[0] + action[1] * action[1]).sqrt().max(1e-9);
                [action[0] / n, action[1] / n]
            };
            let bound = TABLE_HALF_WIDTH - OBJECT_RADIUS;
            after[0] = (s.gripper[0] + dir[0] * reach).clamp(-bound, bound);
            after[1] = (s.gripper[1] + dir[1] * reach).clamp(-bound, bound);
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

    fn scripted_action(&self, script: Script, _memory: &mut ScriptMemory) -> Vec<f64> {
        let s = &self.state;
        let object = s.object.position();
        let goal = [s.goal[0], s.goal[1], 0.0];
        let to_goal = [goal[0] - object[0], goal[1] - object[1]];
        let dist = (to_goal[0] * to_goal[0] + to_goal[1] * to_goal[1]).sqrt().max(1e-9);
        let dir = [to_goal[0] / dist, to_goal[1] / dist];
        let target = match script {
            Script::Untouched => {
                // approach radially and stop short of contact
                let g = s.gripper;
                let rel = [g[0] - object[0], g[1] - object[1]];
                let r = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt().max(1e-9);
                let stop = Self::contact_distance() + 0.03;
                [object[0] + rel[0] / r * stop, object[1] + rel[1] / r * stop, 0.0]
            }
            Script::Deliver | Script::Drop => {
                let g = s.gripper;
                let reach = Self::contact_distance();
                let behind = [object[0] - dir[0] * (reach + 0.005), object[1] - dir[1] * (reach + 0.005), 0.0];
                if distance(g, behind) < 0.006 {
                    let depth = (dist - 0.005).clamp(0.0, MAX_STEP);
                    [g[0] + dir[0] * depth, g[1] + dir[1] * depth, 0.0]
                } else {
                    // detour around the side the gripper is already on
                    let side = [-dir[1], dir[0]];
                    let sign = if (g[0] - object[0]) * side[0] + (g[1] - object[1]) * side[1] >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let clear = reach + 0.02;
                    let waypoint = |lateral: f64, along: f64| {
                        [
                            object[0] + side[0] * sign * lateral + dir[0] * along,
                            object[1] + side[1] * sign * lateral + dir[1] * along,
                            0.0,
                        ]
                    };
                    [behind, waypoint(clear, -(reach + 0.005)), waypoint(clear, 0.0), waypoint(clear, clear)]
                        .into_iter()
                        .find(|&w| segment_clearance(g, w, object) > reach + 0.002)
                        .unwrap_or_else(|| waypoint(clear, clear))
                }
            }
        };
        let a = seek(s.gripper, target, MAX_STEP);
        vec![a[0], a[1]]
    }
}

/// Smallest distance from `point` to the segment `a -> b`, in the plane.
fn segment_clearance(a: [f64; 3], b: [f64; 3], point: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [point[0] - a[0], point[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let u = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let c = [a[0] + u * ab[0] - point[0], a[1] + u * ab[1] - point[1]];
    (c[0] * c[0] + c[1] * c[1]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{trajectory_energy, EnergyParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(env: &mut PlanarPush, script: Script, seed: u64) -> (Vec<ObjectState>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset(&mut rng);
        let mut states = vec![env.state().object];
        let mut last = -1.0;
        let mut memory = ScriptMemory::default();
        for _ in 0..env.spec().horizon {
            let a = env.scripted_action(script, &mut memory);
            last = env.step(&a).unwrap().reward;
            states.push(env.state().object);
        }
        (states, last)
    }

    #[test]
    fn scripted_push_reaches_goal() {
        let mut env = PlanarPush::new();
        let mut solved = 0;
        for seed in 0..50 {
            if run(&mut env, Script::Deliver, seed).1 == 0.0 {
                solved += 1;
            }
        }
        assert!(solved >= 48, "solved {solved}/50");
    }

    #[test]
    fn untouched_object_has_zero_energy() {
        let mut env = PlanarPush::new();
        let params = EnergyParams::default();
        for seed in 0..20 {
            let (states, _) = run(&mut env, Script::Untouched, seed);
            assert_eq!(trajectory_energy(&states, &params).unwrap(), 0.0);
        }
        let (states, _) = run(&mut env, Script::Deliver, 3);
        assert!(trajectory_energy(&states, &params).unwrap() > 0.0);
    }

    #[test]
    fn object_stays_on_table() {
        let mut env = PlanarPush::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            env.reset(&mut rng);
            for _ in 0..HORIZON {
                let a = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
                env.step(&a).unwrap();
                let p = env.state().object.position();
                assert!(p[0].abs() <= TABLE_HALF_WIDTH && p[1].abs() <= TABLE_HALF_WIDTH);
                assert_eq!(p[2], 0.0);
            }
        }
    }
}
