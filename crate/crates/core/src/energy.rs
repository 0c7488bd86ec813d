//! Object energy along a trajectory of achieved-goal states.
//!
//! Only the manipulated object contributes. Each state carries a position
//! and a scalar-first unit quaternion; velocities are backward finite
//! differences over the sampling interval `dt`. The energy of a trajectory
//! is the sum of its clipped, positive step-over-step increases in total
//! (potential + kinetic + rotational) energy.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position (meters) and orientation (scalar-first unit quaternion) of the
/// manipulated object at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl ObjectState {
    /// Builds a state, normalizing the quaternion.
    pub fn new(position: [f64; 3], orientation: [f64; 4]) -> Result<Self> {
        if position.iter().chain(orientation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite component in {position:?} / {orientation:?}"
            )));
        }
        let norm = orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidState("zero quaternion".into()));
        }
        Ok(Self {
            position,
            orientation: orientation.map(|v| v / norm),
        })
    }

    /// A state with identity orientation.
    pub fn at(position: [f64; 3]) -> Result<Self> {
        Self::new(position, [1.0, 0.0, 0.0, 0.0])
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    pub fn orientation(&self) -> [f64; 4] {
        self.orientation
    }

    /// The seven-component vector `[x, y, z, a, b, c, d]`.
    pub fn to_vector(&self) -> [f64; 7] {
        let [x, y, z] = self.position;
        let [a, b, c, d] = self.orientation;
        [x, y, z, a, b, c, d]
    }
}

/// Roll, pitch and yaw in radians (rotations about x, y and z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Physical constants for the energy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
    pub dt: f64,
    /// Ceiling applied to a single transition's energy.
    pub e_tran_max: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.81,
            inertia: [1.0; 3],
            dt: 0.04,
            e_tran_max: 0.5,
        }
    }
}

impl EnergyParams {
    pub fn with_clip(e_tran_max: f64) -> Result<Self> {
        let params = Self {
            e_tran_max,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("inertia_x", self.inertia[0]),
            ("inertia_y", self.inertia[1]),
            ("inertia_z", self.inertia[2]),
            ("dt", self.dt),
            ("e_tran_max", self.e_tran_max),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Converts a scalar-first quaternion `(a, b, c, d)` to roll/pitch/yaw.
///
/// The pitch argument is clamped to `[-1, 1]`, so rounding overshoot at the
/// gimbal boundary yields `±π/2` instead of NaN. At exact gimbal lock roll
/// and yaw are not unique; whatever the `atan2` branches produce is returned.
pub fn quat_to_euler(q: [f64; 4]) -> Result<EulerAngles> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite quaternion {q:?}")));
    }
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidState(format!(
            "quaternion norm {norm} is not within 1e-3 of 1"
        )));
    }
    let [a, b, c, d] = q.map(|v| v / norm);
    Ok(euler_unchecked(a, b, c, d))
}

fn euler_unchecked(a: f64, b: f64, c: f64, d: f64) -> EulerAngles {
    EulerAngles {
        roll: (2.0 * (a * b + c * d)).atan2(1.0 - 2.0 * (b * b + c * c)),
        pitch: (2.0 * (a * c - d * b)).clamp(-1.0, 1.0).asin(),
        yaw: (2.0 * (a * d + b * c)).atan2(1.0 - 2.0 * (c * c + d * d)),
    }
}

/// Wraps an angle difference into `[-π, π]`.
pub fn wrap_angle(delta: f64) -> f64 {
    let wrapped = (delta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can return TAU itself for inputs just below a multiple of TAU
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

pub fn potential_energy(state: &ObjectState, params: &EnergyParams) -> f64 {
    params.mass * params.gravity * state.position[2]
}

pub fn kinetic_energy(prev: &ObjectState, cur: &ObjectState, params: &EnergyParams) -> f64 {
    let squared: f64 = prev
        .position
        .iter()
        .zip(cur.position.iter())
        .map(|(p, c)| (c - p) * (c - p))
        .sum();
    params.mass * squared / (2.0 * params.dt * params.dt)
}

/// Rotational energy from Euler-angle finite differences, each wrapped into
/// `[-π, π]` before dividing by `dt`.
pub fn rotational_energy(prev: &ObjectState, cur: &ObjectState, params: &EnergyParams) -> f64 {
    let [a0, b0, c0, d0] = prev.orientation;
    let [a1, b1, c1, d1] = cur.orientation;
    let e0 = euler_unchecked(a0, b0, c0, d0);
    let e1 = euler_unchecked(a1, b1, c1, d1);
    let deltas = [
        wrap_angle(e1.roll - e0.roll),
        wrap_angle(e1.pitch - e0.pitch),
        wrap_angle(e1.yaw - e0.yaw),
    ];
    let weighted: f64 = deltas
        .iter()
        .zip(params.inertia.iter())
        .map(|(delta, inertia)| inertia * delta * delta)
        .sum();
    weighted / (2.0 * params.dt * params.dt)
}

/// Total energy at `cur`; the velocity terms use the `prev -> cur` step.
pub fn total_energy(prev: &ObjectState, cur: &ObjectState, params: &EnergyParams) -> f64 {
    potential_energy(cur, params) + kinetic_energy(prev, cur, params) + rotational_energy(prev, cur, params)
}

/// Positive part of a total-energy change, capped at `e_tran_max`.
pub fn transition_energy(prev_total: f64, cur_total: f64, e_tran_max: f64) -> f64 {
    (cur_total - prev_total).clamp(0.0, e_tran_max)
}

/// Total energy of every state. The first state has no predecessor and is
/// treated as being at rest, so only its potential term contributes.
pub fn state_energies(states: &[ObjectState], params: &EnergyParams) -> Vec<f64> {
    let mut energies = Vec::with_capacity(states.len());
    if let Some(first) = states.first() {
        energies.push(total_energy(first, first, params));
    }
    energies.extend(states.windows(2).map(|w| total_energy(&w[0], &w[1], params)));
    energies
}

/// Per-step transition energies from a sequence of total energies.
pub fn transition_energies_from_totals(totals: &[f64], e_tran_max: f64) -> Vec<f64> {
    totals
        .windows(2)
        .map(|w| transition_energy(w[0], w[1], e_tran_max))
        .collect()
}

/// Per-step transition energies for `t = 1..T`.
pub fn transition_energies(states: &[ObjectState], params: &EnergyParams) -> Result<Vec<f64>> {
    if states.len() < 2 {
        return Err(Error::InvalidTrajectory(states.len()));
    }
    Ok(transition_energies_from_totals(&state_energies(states, params), params.e_tran_max))
}

/// Sum of transition energies over the trajectory `s_0 .. s_T`.
pub fn trajectory_energy(states: &[ObjectState], params: &EnergyParams) -> Result<f64> {
    Ok(transition_energies(states, params)?.iter().sum())
}
