//! Local-trajectory oracle.
//!
//! Stands in for a perception stack: given the vehicle pose, emits the
//! next few centerline points ahead of it, expressed in the body frame
//! (x forward, y left, z up). Optional Gaussian noise emulates imperfect
//! perception.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::math::Vec3;
use crate::rng;
use crate::track::Track;

#[derive(Clone, Debug, PartialEq)]
pub struct WaypointSet {
    /// Body-frame waypoints, nearest first.
    pub points: Vec<Vec3>,
    /// Arc-length gap between consecutive waypoints, meters.
    pub spacing: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Number of waypoints emitted.
    pub count: usize,
    /// Arc-length spacing ahead of the vehicle, meters.
    pub spacing: f64,
    /// Per-coordinate Gaussian noise, meters. Zero disables the stream.
    pub noise_sigma: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            count: 5,
            spacing: 5.0,
            noise_sigma: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> bool {
        self.count >= 2 && self.spacing > 0.0 && self.noise_sigma >= 0.0
    }
}

/// Owns the per-episode noise stream.
pub struct WaypointOracle {
    pub cfg: OracleConfig,
    noise: ChaCha8Rng,
}

impl WaypointOracle {
    pub fn new(cfg: OracleConfig, seed: u64) -> Self {
        Self {
            cfg,
            noise: rng::stream(seed, "oracle-noise"),
        }
    }

    /// Waypoints at arc lengths s0 + i*spacing (i = 1..=count) ahead of
    /// the vehicle's centerline projection, in the body frame.
    pub fn waypoints(&mut self, track: &Track, state: &VehicleState) -> WaypointSet {
        let s0 = track.project(&state.position).arc_length;
        let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
        let mut points = Vec::with_capacity(self.cfg.count);
        for i in 1..=self.cfg.count {
            let world = track.point_at(s0 + i as f64 * self.cfg.spacing);
            let d = world - state.position;
            let mut body = Vec3::new(
                cos_yaw * d.x + sin_yaw * d.y,
                -sin_yaw * d.x + cos_yaw * d.y,
                d.z,
            );
            if self.cfg.noise_sigma > 0.0 {
                body.x += self.cfg.noise_sigma * rng::next_gaussian(&mut self.noise);
                body.y += self.cfg.noise_sigma * rng::next_gaussian(&mut self.noise);
                body.z += self.cfg.noise_sigma * rng::next_gaussian(&mut self.noise);
            }
            points.push(body);
        }
        WaypointSet {
            points,
            spacing: self.cfg.spacing,
        }
    }
}
