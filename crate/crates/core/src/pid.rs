//! The two demonstrator controllers.
//!
//! Both are stacks of scalar PID loops over the body-frame waypoint set:
//! rudder tracks the bearing to the target waypoint, aileron its lateral
//! offset, elevator a shaped forward-speed target, and throttle its
//! vertical offset. The conservative controller tracks the first
//! waypoint slowly and brakes ahead of curves; the aggressive one tracks
//! the fourth waypoint at full speed and pays for it in corners.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlCommand, VehicleState};
use crate::oracle::WaypointSet;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup clamp on the accumulated integral.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 1.0,
        }
    }
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral_limit: 1.0,
        }
    }
}

/// One scalar PID loop.
#[derive(Clone, Debug)]
pub struct PidState {
    pub gains: PidGains,
    integral: f64,
    prev_error: f64,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
    }

    /// One discrete update: output = kp*e + ki*clamp(integral) + kd*(e - e_prev)/dt.
    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        self.integral = (self.integral + error * dt)
            .clamp(-self.gains.integral_limit, self.gains.integral_limit);
        let derivative = (error - self.prev_error) / dt;
        self.prev_error = error;
        self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * derivative
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PidControllerConfig {
    /// Which waypoint the controller tracks (1-based).
    pub target_wp_index: usize,
    /// Cruise speed target, m/s.
    pub target_speed: f64,
    /// How strongly the speed target shrinks with path bend ahead
    /// (fraction of target speed per radian of bend over the horizon).
    pub curve_slow_gain: f64,
    /// Floor for the shaped speed target, as a fraction of target_speed.
    pub min_speed_frac: f64,
    pub yaw: PidGains,
    pub roll: PidGains,
    pub pitch: PidGains,
    pub throttle: PidGains,
}

impl PidControllerConfig {
    /// Slow, center-hugging demonstrator tracking the first waypoint.
    pub fn conservative() -> Self {
        Self {
            target_wp_index: 1,
            target_speed: 7.0,
            curve_slow_gain: 0.5,
            min_speed_frac: 0.70,
            yaw: PidGains::new(2.0, 0.0, 0.08),
            roll: PidGains::new(0.18, 0.0, 0.12),
            pitch: PidGains::new(0.25, 0.5, 0.0),
            throttle: PidGains::new(0.8, 0.2, 0.6),
        }
    }

    /// Full-speed demonstrator tracking the fourth waypoint.
    pub fn aggressive() -> Self {
        Self {
            target_wp_index: 4,
            target_speed: 25.0,
            curve_slow_gain: 0.0,
            min_speed_frac: 1.0,
            yaw: PidGains::new(0.6, 0.0, 0.1),
            roll: PidGains {
                kp: 0.35,
                ki: 0.3,
                kd: 0.3,
                integral_limit: 1.0,
            },
            pitch: PidGains::new(0.5, 0.5, 0.0),
            throttle: PidGains::new(0.8, 0.2, 0.6),
        }
    }
}

impl Default for PidControllerConfig {
    fn default() -> Self {
        Self::conservative()
    }
}

/// A demonstrator: per-channel PID states plus the tracking config.
#[derive(Clone, Debug)]
pub struct PidController {
    pub cfg: PidControllerConfig,
    yaw: PidState,
    roll: PidState,
    pitch: PidState,
    throttle: PidState,
}

impl PidController {
    pub fn new(cfg: PidControllerConfig) -> Self {
        Self {
            cfg,
            yaw: PidState::new(cfg.yaw),
            roll: PidState::new(cfg.roll),
            pitch: PidState::new(cfg.pitch),
            throttle: PidState::new(cfg.throttle),
        }
    }

    /// Clear integrators and derivative history (new episode / after reset).
    pub fn reset(&mut self) {
        self.yaw.reset();
        self.roll.reset();
        self.pitch.reset();
        self.throttle.reset();
    }

    /// Shaped forward-speed target: slow down in proportion to how much
    /// the centerline bends over the waypoint horizon.
    pub fn speed_target(&self, wps: &WaypointSet) -> f64 {
        let bend = waypoint_bend(wps);
        let frac = (1.0 - self.cfg.curve_slow_gain * bend.abs())
            .clamp(self.cfg.min_speed_frac.min(1.0), 1.0);
        self.cfg.target_speed * frac
    }

    /// Map the waypoint set and vehicle state to a control command.
    pub fn act(&mut self, wps: &WaypointSet, state: &VehicleState, dt: f64) -> ControlCommand {
        let idx = self.cfg.target_wp_index.clamp(1, wps.points.len());
        let target = wps.points[idx - 1];

        let yaw_error = target.y.atan2(target.x);
        let lateral_error = target.y;
        let speed_error = self.speed_target(wps) - state.forward_speed();
        let vertical_error = target.z;

        ControlCommand::new(
            self.throttle.update(vertical_error, dt),
            self.roll.update(lateral_error, dt),
            self.pitch.update(speed_error, dt),
            self.yaw.update(yaw_error, dt),
        )
    }
}

/// Total heading change of the centerline over the waypoint horizon,
/// radians (signed; positive = bending left).
pub fn waypoint_bend(wps: &WaypointSet) -> f64 {
    let n = wps.points.len();
    if n < 3 {
        return 0.0;
    }
    let first = wps.points[1] - wps.points[0];
    let last = wps.points[n - 1] - wps.points[n - 2];
    let cross = first.x * last.y - first.y * last.x;
    let dot = first.x * last.x + first.y * last.y;
    cross.atan2(dot)
}
