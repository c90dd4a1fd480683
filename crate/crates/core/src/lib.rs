//! Headless drone-racing simulator and controller-fusion training harness.
//!
//! The crate simulates a 4-channel quadrotor on closed spline tracks,
//! ships two imperfect PID demonstrators, and trains a small dense policy
//! network online from their filtered demonstrations. Evaluation follows
//! a two-lap gate/score/reset protocol with SVG and Markdown reporting.

pub mod config;
pub mod dynamics;
pub mod evaluator;
pub mod math;
pub mod neural;
pub mod oracle;
pub mod pid;
pub mod report;
pub mod rng;
pub mod track;
pub mod trackgen;
pub mod trainer;

pub use math::Vec3;
