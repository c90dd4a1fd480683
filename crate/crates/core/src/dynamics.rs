//! Fixed-timestep quadrotor motion model.
//!
//! Altitude-stabilized kinematics: the four control channels command
//! body-frame accelerations (pitch/roll plane, climb) and a yaw rate,
//! with linear drag on the velocity. Attitude is collapsed into yaw;
//! gravity is absorbed by the throttle channel. Commanded hard enough,
//! the model tops out at `c_xy / k_d` ~ 30 m/s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{wrap_angle, Vec3};

/// Physical state of the simulated vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    /// World-frame position, meters.
    pub position: Vec3,
    /// World-frame velocity, m/s.
    pub velocity: Vec3,
    /// Heading, radians in (-pi, pi].
    pub yaw: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            yaw: wrap_angle(yaw),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.yaw.is_finite()
    }

    /// Velocity expressed in the body frame (x forward, y left, z up).
    pub fn body_velocity(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(
            c * self.velocity.x + s * self.velocity.y,
            -s * self.velocity.x + c * self.velocity.y,
            self.velocity.z,
        )
    }

    /// Forward (body-x) speed component, m/s.
    pub fn forward_speed(&self) -> f64 {
        let (s, c) = self.yaw.sin_cos();
        c * self.velocity.x + s * self.velocity.y
    }
}

/// Four-channel control signal: throttle (T), roll/aileron (A),
/// pitch/elevator (E), yaw/rudder (R). Each channel lives in [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlCommand {
    pub throttle: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl ControlCommand {
    pub const ZERO: Self = Self {
        throttle: 0.0,
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub fn new(throttle: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            throttle,
            roll,
            pitch,
            yaw,
        }
        .clamped()
    }

    /// Channels clamped into [-1, 1]; never rejected.
    pub fn clamped(self) -> Self {
        Self {
            throttle: self.throttle.clamp(-1.0, 1.0),
            roll: self.roll.clamp(-1.0, 1.0),
            pitch: self.pitch.clamp(-1.0, 1.0),
            yaw: self.yaw.clamp(-1.0, 1.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.throttle.is_finite()
            && self.roll.is_finite()
            && self.pitch.is_finite()
            && self.yaw.is_finite()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.throttle, self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Gains of the motion model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Step length, seconds.
    pub dt: f64,
    /// Planar command gain, m/s^2 per unit of pitch/roll.
    pub c_xy: f64,
    /// Vertical command gain, m/s^2 per unit of throttle.
    pub c_z: f64,
    /// Yaw-rate gain, rad/s per unit of rudder.
    pub c_yaw: f64,
    /// Linear drag coefficient, 1/s.
    pub k_d: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 60.0,
            c_xy: 20.0,
            c_z: 8.0,
            c_yaw: std::f64::consts::PI,
            k_d: 0.666,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.c_xy > 0.0 && self.c_z > 0.0 && self.c_yaw > 0.0 && self.k_d > 0.0)
        {
            return Err(DynamicsError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("vehicle state contains non-finite components")]
    NonFiniteState,
    #[error("dynamics config requires dt > 0 and positive gains")]
    InvalidConfig,
}

/// Advance the vehicle one step under a command (semi-implicit Euler).
///
/// Yaw integrates first; the commanded body acceleration is rotated by
/// the updated yaw, drag is applied, then velocity and position update
/// in that order. Deterministic: no randomness anywhere in the model.
pub fn step(
    state: &VehicleState,
    cmd: ControlCommand,
    cfg: &DynamicsConfig,
) -> Result<VehicleState, DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFiniteState);
    }
    let cmd = cmd.clamped();
    let dt = cfg.dt;

    let yaw = wrap_angle(state.yaw + cfg.c_yaw * cmd.yaw * dt);
    let (s, c) = yaw.sin_cos();
    let body_accel = Vec3::new(cfg.c_xy * cmd.pitch, cfg.c_xy * cmd.roll, cfg.c_z * cmd.throttle);
    let world_accel = Vec3::new(
        c * body_accel.x - s * body_accel.y,
        s * body_accel.x + c * body_accel.y,
        body_accel.z,
    ) - cfg.k_d * state.velocity;

    let velocity = state.velocity + world_accel * dt;
    let position = state.position + velocity * dt;

    Ok(VehicleState {
        position,
        velocity,
        yaw,
    })
}

/// Teleport to a pose: position and yaw set, velocity zeroed.
pub fn reset_to(position: Vec3, yaw: f64) -> VehicleState {
    VehicleState::at_rest(position, yaw)
}
