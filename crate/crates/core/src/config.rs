//! Run configuration.
//!
//! One sectioned TOML file covers every tunable in the harness. Missing
//! keys fall back to the documented defaults; unknown keys are rejected
//! with the offending location so typos never silently no-op.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsConfig;
use crate::neural::{AdamConfig, LossWeights, OuConfig, DEFAULT_HIDDEN};
use crate::oracle::OracleConfig;
use crate::pid::PidControllerConfig;
use crate::report::RenderSpec;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed; every random consumer hangs off a named substream.
    pub seed: u64,
    pub dynamics: DynamicsConfig,
    pub track: TrackConfig,
    pub oracle: OracleConfig,
    pub pid: PidSection,
    pub neural: NeuralConfig,
    pub trainer: TrainerConfig,
    pub evaluator: EvaluatorConfig,
    pub report: RenderSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dynamics: DynamicsConfig::default(),
            track: TrackConfig::default(),
            oracle: OracleConfig::default(),
            pid: PidSection::default(),
            neural: NeuralConfig::default(),
            trainer: TrainerConfig::default(),
            evaluator: EvaluatorConfig::default(),
            report: RenderSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PidSection {
    pub conservative: PidControllerConfig,
    pub aggressive: PidControllerConfig,
}

impl Default for PidSection {
    fn default() -> Self {
        Self {
            conservative: PidControllerConfig::conservative(),
            aggressive: PidControllerConfig::aggressive(),
        }
    }
}

/// Corridor defaults and random-track generation parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub gate_half_width: f64,
    pub gate_half_height: f64,
    /// Defaults for `track gen`.
    pub gate_count: usize,
    pub corner_count: usize,
    pub base_radius_m: f64,
    pub corner_radius_min_m: f64,
    pub corner_radius_max_m: f64,
    pub altitude_m: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            width_m: 10.0,
            height_m: 5.0,
            gate_half_width: crate::track::DEFAULT_GATE_HALF_WIDTH,
            gate_half_height: crate::track::DEFAULT_GATE_HALF_HEIGHT,
            gate_count: 12,
            corner_count: 4,
            base_radius_m: 75.0,
            corner_radius_min_m: 10.0,
            corner_radius_max_m: 16.0,
            altitude_m: 5.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralConfig {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub adam: AdamConfig,
    pub loss_weights: LossWeights,
    pub ou: OuConfig,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout_rate: 0.5,
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
            ou: OuConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// Episodes per demonstrator (M).
    pub episodes_per_controller: usize,
    /// Hard step cap per episode (T).
    pub max_steps_per_episode: usize,
    /// Length of the noisy bootstrap phase, steps.
    pub explore_steps: usize,
    pub batch_size: usize,
    /// Temporary-buffer horizons per controller.
    pub buffer_k1: usize,
    pub buffer_k2: usize,
    pub laps_per_episode: usize,
    /// Optional ring capacity of the training database (unset = unbounded).
    pub db_capacity: Option<usize>,
    /// Simulation steps per SGD update (1 = update every step).
    pub sim_steps_per_update: usize,
    /// Record every Nth SGD loss into the report.
    pub loss_curve_stride: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes_per_controller: 40,
            max_steps_per_episode: 2400,
            explore_steps: 8000,
            batch_size: 32,
            buffer_k1: 1,
            buffer_k2: 50,
            laps_per_episode: 2,
            db_capacity: None,
            sim_steps_per_update: 1,
            loss_curve_stride: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluatorConfig {
    pub laps: usize,
    pub gate_timeout_s: f64,
    /// Parallel (track, policy) cells in `eval`.
    pub jobs: usize,
    /// Perception-noise sigma applied during evaluation, meters.
    pub perception_noise: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self {
            laps: 2,
            gate_timeout_s: 10.0,
            jobs: 1,
            perception_noise: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dynamics
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.oracle.validate() {
            return Err(ConfigError::Invalid(
                "oracle: count >= 2, spacing > 0, noise_sigma >= 0 required".into(),
            ));
        }
        if !self.neural.loss_weights.validate() {
            return Err(ConfigError::Invalid(
                "neural.loss_weights: nonnegative with at least one positive".into(),
            ));
        }
        if self.trainer.batch_size == 0
            || self.trainer.max_steps_per_episode == 0
            || self.trainer.laps_per_episode == 0
            || self.trainer.sim_steps_per_update == 0
            || self.trainer.loss_curve_stride == 0
        {
            return Err(ConfigError::Invalid(
                "trainer: batch_size, max_steps_per_episode, laps_per_episode, \
                 sim_steps_per_update and loss_curve_stride must be positive"
                    .into(),
            ));
        }
        if self.evaluator.laps == 0 || self.evaluator.gate_timeout_s <= 0.0 {
            return Err(ConfigError::Invalid(
                "evaluator: laps and gate_timeout_s must be positive".into(),
            ));
        }
        if self.pid.conservative.target_speed <= 0.0 || self.pid.aggressive.target_speed <= 0.0 {
            return Err(ConfigError::Invalid(
                "pid: target speeds must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let text = "seed = 1\n[dynamics]\ndtt = 0.01\n";
        let err = RunConfig::from_toml(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dtt"), "{msg}");
    }

    #[test]
    fn missing_keys_take_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dynamics, DynamicsConfig::default());
        assert_eq!(cfg.trainer.batch_size, 32);
    }

    #[test]
    fn partial_section_overrides_one_key() {
        let cfg = RunConfig::from_toml("[pid.conservative]\ntarget_speed = 6.0\n").unwrap();
        assert_eq!(cfg.pid.conservative.target_speed, 6.0);
        // Other keys keep their defaults.
        assert_eq!(
            cfg.pid.conservative.target_wp_index,
            PidControllerConfig::conservative().target_wp_index
        );
        assert_eq!(cfg.pid.aggressive, PidControllerConfig::aggressive());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[dynamics]\ndt = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[trainer]\nbatch_size = 0\n").is_err());
    }
}
