//! Episode evaluation protocol.
//!
//! A policy flies a fixed number of laps; gates must be crossed in
//! order. If the next gate is not reached within the timeout, the
//! vehicle teleports to it, the gate counts as missed, and the reset
//! tally grows. Per-step trajectory logs let every figure be re-derived
//! offline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::dynamics::{self, ControlCommand, DynamicsConfig, VehicleState};
use crate::math::Vec3;
use crate::neural::PolicyNet;
use crate::oracle::{OracleConfig, WaypointOracle, WaypointSet};
use crate::pid::{PidController, PidControllerConfig};
use crate::track::{gate_crossed, Track};
use crate::trainer;

/// Anything that can fly an episode.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    /// Clear internal controller state (new episode or reset).
    fn reset(&mut self);
    fn act(
        &mut self,
        wps: &WaypointSet,
        state: &VehicleState,
        last_cmd: ControlCommand,
    ) -> ControlCommand;
    fn clone_box(&self) -> Box<dyn Policy>;
}

pub struct PidPolicy {
    name: String,
    controller: PidController,
    dt: f64,
}

impl PidPolicy {
    pub fn new(name: &str, cfg: PidControllerConfig, dt: f64) -> Self {
        Self {
            name: name.to_string(),
            controller: PidController::new(cfg),
            dt,
        }
    }
}

impl Policy for PidPolicy {
    fn name(&self) -> &str {
        &self.name
    }
    fn reset(&mut self) {
        self.controller.reset();
    }
    fn act(
        &mut self,
        wps: &WaypointSet,
        state: &VehicleState,
        _last_cmd: ControlCommand,
    ) -> ControlCommand {
        self.controller.act(wps, state, self.dt)
    }
    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(Self {
            name: self.name.clone(),
            controller: PidController::new(self.controller.cfg),
            dt: self.dt,
        })
    }
}

pub struct NetPolicy {
    name: String,
    net: PolicyNet,
}

impl NetPolicy {
    pub fn new(name: &str, net: PolicyNet) -> Self {
        Self {
            name: name.to_string(),
            net,
        }
    }
}

impl Policy for NetPolicy {
    fn name(&self) -> &str {
        &self.name
    }
    fn reset(&mut self) {}
    fn act(
        &mut self,
        wps: &WaypointSet,
        state: &VehicleState,
        last_cmd: ControlCommand,
    ) -> ControlCommand {
        trainer::act(&self.net, wps, state, last_cmd)
    }
    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(Self {
            name: self.name.clone(),
            net: self.net.clone(),
        })
    }
}

/// Baseline that never moves; every gate times out.
pub struct HoverPolicy;

impl Policy for HoverPolicy {
    fn name(&self) -> &str {
        "hover"
    }
    fn reset(&mut self) {}
    fn act(&mut self, _: &WaypointSet, _: &VehicleState, _: ControlCommand) -> ControlCommand {
        ControlCommand::ZERO
    }
    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(HoverPolicy)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalSettings {
    pub laps: usize,
    pub gate_timeout_s: f64,
    pub dynamics: DynamicsConfig,
    pub oracle: OracleConfig,
    pub seed: u64,
}

impl EvalSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            laps: cfg.evaluator.laps,
            gate_timeout_s: cfg.evaluator.gate_timeout_s,
            dynamics: cfg.dynamics,
            oracle: OracleConfig {
                noise_sigma: cfg.evaluator.perception_noise,
                ..cfg.oracle
            },
            seed: cfg.seed,
        }
    }
}

/// One row per simulation tick (plus the initial state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub cmd: ControlCommand,
    pub on_track: bool,
    pub next_gate: usize,
    pub reset: bool,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub policy: String,
    pub track: String,
    pub gates_passed: usize,
    pub gates_total: usize,
    pub time_s: f64,
    pub resets: usize,
    /// Set when the policy emitted non-finite commands mid-episode.
    pub aborted: bool,
    pub log: Vec<LogRow>,
}

impl EpisodeResult {
    pub fn score_fraction(&self) -> f64 {
        self.gates_passed as f64 / self.gates_total.max(1) as f64
    }

    /// Mean ground speed over the logged trajectory, m/s.
    pub fn mean_speed(&self) -> f64 {
        if self.log.is_empty() {
            return 0.0;
        }
        self.log.iter().map(|r| r.velocity.norm()).sum::<f64>() / self.log.len() as f64
    }
}

/// Fly `laps` laps of the track under the policy.
pub fn evaluate(track: &Track, policy: &mut dyn Policy, settings: &EvalSettings) -> EpisodeResult {
    let dt = settings.dynamics.dt;
    let gate_count = track.gates.len();
    let timeout_ticks = (settings.gate_timeout_s / dt).round().max(1.0) as u64;
    let events_total = settings.laps * gate_count;

    let mut oracle = WaypointOracle::new(settings.oracle, settings.seed);
    policy.reset();
    let mut state = trainer::start_pose(track);
    let mut last_cmd = ControlCommand::ZERO;
    let mut expected = 1 % gate_count;
    let mut events = 0usize;
    let mut passed = 0usize;
    let mut resets = 0usize;
    let mut ticks_since_event: u64 = 0;
    let mut tick: u64 = 0;
    let mut aborted = false;

    let mut log = Vec::with_capacity(4096);
    log.push(LogRow {
        t: 0.0,
        position: state.position,
        velocity: state.velocity,
        yaw: state.yaw,
        cmd: ControlCommand::ZERO,
        on_track: track.is_on_track(&state.position),
        next_gate: expected,
        reset: false,
    });

    while events < events_total {
        tick += 1;
        if ticks_since_event + 1 >= timeout_ticks {
            // Timed out: teleport to the gate it failed to reach. The
            // gate counts as missed, not passed.
            let gate = &track.gates[expected];
            state = dynamics::reset_to(gate.center, gate.normal.y.atan2(gate.normal.x));
            last_cmd = ControlCommand::ZERO;
            policy.reset();
            resets += 1;
            events += 1;
            expected = (expected + 1) % gate_count;
            ticks_since_event = 0;
            log.push(LogRow {
                t: tick as f64 * dt,
                position: state.position,
                velocity: state.velocity,
                yaw: state.yaw,
                cmd: ControlCommand::ZERO,
                on_track: track.is_on_track(&state.position),
                next_gate: expected,
                reset: true,
            });
            continue;
        }

        let wps = oracle.waypoints(track, &state);
        let cmd = policy.act(&wps, &state, last_cmd);
        if !cmd.is_finite() {
            aborted = true;
            break;
        }
        let next = match dynamics::step(&state, cmd, &settings.dynamics) {
            Ok(s) => s,
            Err(_) => {
                aborted = true;
                break;
            }
        };
        ticks_since_event += 1;

        if gate_crossed(&track.gates[expected], &state.position, &next.position) {
            passed += 1;
            events += 1;
            expected = (expected + 1) % gate_count;
            ticks_since_event = 0;
        }

        log.push(LogRow {
            t: tick as f64 * dt,
            position: next.position,
            velocity: next.velocity,
            yaw: next.yaw,
            cmd,
            on_track: track.is_on_track(&next.position),
            next_gate: expected,
            reset: false,
        });
        state = next;
        last_cmd = cmd;
    }

    EpisodeResult {
        policy: policy.name().to_string(),
        track: track.name.clone(),
        gates_passed: passed,
        gates_total: events_total,
        time_s: tick as f64 * dt,
        resets,
        aborted,
        log,
    }
}

/// Re-derive gate and reset counts from a trajectory log.
pub fn rescan_log(track: &Track, rows: &[LogRow]) -> (usize, usize) {
    let gate_count = track.gates.len();
    let mut expected = 1 % gate_count;
    let mut passed = 0;
    let mut resets = 0;
    for i in 1..rows.len() {
        if rows[i].reset {
            resets += 1;
            expected = (expected + 1) % gate_count;
            continue;
        }
        if gate_crossed(
            &track.gates[expected],
            &rows[i - 1].position,
            &rows[i].position,
        ) {
            passed += 1;
            expected = (expected + 1) % gate_count;
        }
    }
    (passed, resets)
}

// ---------------------------------------------------------------------------
// Suite evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub policy_names: Vec<String>,
    pub track_names: Vec<String>,
    /// `cells[policy][track]`.
    pub cells: Vec<Vec<EpisodeResult>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicySummary {
    pub score_pct: f64,
    pub time_s: f64,
    pub resets: f64,
}

impl SuiteResult {
    /// Averages exactly as the result tables define them: score is the
    /// pooled gate fraction, time/resets are per-track means.
    pub fn summary(&self, policy_idx: usize) -> PolicySummary {
        let row = &self.cells[policy_idx];
        let passed: usize = row.iter().map(|r| r.gates_passed).sum();
        let total: usize = row.iter().map(|r| r.gates_total).sum();
        PolicySummary {
            score_pct: 100.0 * passed as f64 / total.max(1) as f64,
            time_s: row.iter().map(|r| r.time_s).sum::<f64>() / row.len().max(1) as f64,
            resets: row.iter().map(|r| r.resets as f64).sum::<f64>() / row.len().max(1) as f64,
        }
    }
}

/// Evaluate every policy on every track. `jobs` > 1 fans the (policy,
/// track) cells over threads; results are merged by index so the output
/// is identical to the sequential one.
pub fn evaluate_suite(
    tracks: &[Track],
    policies: &[Box<dyn Policy>],
    settings: &EvalSettings,
    jobs: usize,
) -> SuiteResult {
    let mut cell_jobs: Vec<(usize, usize)> = Vec::new();
    for p in 0..policies.len() {
        for t in 0..tracks.len() {
            cell_jobs.push((p, t));
        }
    }

    let mut results: Vec<Option<EpisodeResult>> = Vec::new();
    results.resize_with(cell_jobs.len(), || None);

    if jobs <= 1 {
        for (slot, &(p, t)) in cell_jobs.iter().enumerate() {
            let mut policy = policies[p].clone_box();
            results[slot] = Some(evaluate(&tracks[t], policy.as_mut(), settings));
        }
    } else {
        let chunk = cell_jobs.len().div_ceil(jobs);
        let mut slots: Vec<&mut [Option<EpisodeResult>]> = results.chunks_mut(chunk).collect();
        std::thread::scope(|scope| {
            for (w, out) in slots.iter_mut().enumerate() {
                let jobs_here = &cell_jobs[w * chunk..(w * chunk + out.len()).min(cell_jobs.len())];
                let policies = &policies;
                scope.spawn(move || {
                    for (slot, &(p, t)) in out.iter_mut().zip(jobs_here) {
                        let mut policy = policies[p].clone_box();
                        *slot = Some(evaluate(&tracks[t], policy.as_mut(), settings));
                    }
                });
            }
        });
    }

    let mut cells: Vec<Vec<EpisodeResult>> = Vec::with_capacity(policies.len());
    let mut iter = results.into_iter();
    for _ in 0..policies.len() {
        let row: Vec<EpisodeResult> = (0..tracks.len())
            .map(|_| iter.next().unwrap().expect("cell evaluated"))
            .collect();
        cells.push(row);
    }

    SuiteResult {
        policy_names: policies.iter().map(|p| p.name().to_string()).collect(),
        track_names: tracks.iter().map(|t| t.name.clone()).collect(),
        cells,
    }
}

// ---------------------------------------------------------------------------
// Trajectory log CSV
// ---------------------------------------------------------------------------

pub const LOG_HEADER: &str = "t,x,y,z,vx,vy,vz,yaw,T,A,E,R,on_track,next_gate,reset";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("trajectory log row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("trajectory log header mismatch: expected {LOG_HEADER:?}")]
    Header,
}

pub fn write_log_csv(rows: &[LogRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + 64);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let c = r.cmd;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.position.x,
            r.position.y,
            r.position.z,
            r.velocity.x,
            r.velocity.y,
            r.velocity.z,
            r.yaw,
            c.throttle,
            c.roll,
            c.pitch,
            c.yaw,
            r.on_track as u8,
            r.next_gate,
            r.reset as u8,
        ));
    }
    out
}

pub fn parse_log_csv(text: &str) -> Result<Vec<LogRow>, LogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == LOG_HEADER => {}
        _ => return Err(LogError::Header),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row_no = idx + 1; // 1-based, counting the header as row 1
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(LogError::Row {
                row: row_no,
                message: format!("expected 15 fields, got {}", fields.len()),
            });
        }
        let f = |i: usize| -> Result<f64, LogError> {
            fields[i].parse::<f64>().map_err(|e| LogError::Row {
                row: row_no,
                message: format!("field {}: {e}", i + 1),
            })
        };
        let flag = |i: usize| -> Result<bool, LogError> {
            match fields[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(LogError::Row {
                    row: row_no,
                    message: format!("field {}: expected 0/1, got {other:?}", i + 1),
                }),
            }
        };
        rows.push(LogRow {
            t: f(0)?,
            position: Vec3::new(f(1)?, f(2)?, f(3)?),
            velocity: Vec3::new(f(4)?, f(5)?, f(6)?),
            yaw: f(7)?,
            cmd: ControlCommand {
                throttle: f(8)?,
                roll: f(9)?,
                pitch: f(10)?,
                yaw: f(11)?,
            },
            on_track: flag(12)?,
            next_gate: fields[13].parse().map_err(|e| LogError::Row {
                row: row_no,
                message: format!("field 14: {e}"),
            })?,
            reset: flag(14)?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Results file
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub policy: String,
    pub tracks: Vec<TrackResult>,
    pub avg: AvgResult,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrackResult {
    pub name: String,
    pub gates_passed: usize,
    pub gates_total: usize,
    pub time_s: f64,
    pub resets: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub aborted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AvgResult {
    pub score_pct: f64,
    pub time_s: f64,
    pub resets: f64,
}

impl ResultsFile {
    pub fn from_suite(suite: &SuiteResult, policy_idx: usize) -> Self {
        let summary = suite.summary(policy_idx);
        Self {
            policy: suite.policy_names[policy_idx].clone(),
            tracks: suite.cells[policy_idx]
                .iter()
                .map(|r| TrackResult {
                    name: r.track.clone(),
                    gates_passed: r.gates_passed,
                    gates_total: r.gates_total,
                    time_s: r.time_s,
                    resets: r.resets,
                    aborted: r.aborted,
                })
                .collect(),
            avg: AvgResult {
                score_pct: summary.score_pct,
                time_s: summary.time_s,
                resets: summary.resets,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn circle_track() -> Track {
        let n = 48;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vec3::new(45.0 * a.cos(), 45.0 * a.sin(), 5.0)
            })
            .collect();
        Track::build("circle45", &pts, 10.0, 5.0, 8, 1.5, 1.25).unwrap()
    }

    fn settings() -> EvalSettings {
        EvalSettings {
            laps: 2,
            gate_timeout_s: 10.0,
            dynamics: DynamicsConfig::default(),
            oracle: OracleConfig::default(),
            seed: 0,
        }
    }

    #[test]
    fn hover_policy_times_out_every_gate() {
        let track = circle_track();
        let s = settings();
        let result = evaluate(&track, &mut HoverPolicy, &s);
        assert_eq!(result.gates_passed, 0);
        assert_eq!(result.resets, result.gates_total);
        let cap = s.laps as f64 * track.gates.len() as f64 * s.gate_timeout_s;
        assert!((result.time_s - cap).abs() < 1e-9, "{} vs cap {cap}", result.time_s);
        assert!(!result.aborted);
    }

    #[test]
    fn time_equals_dt_times_log_length() {
        let track = circle_track();
        let s = settings();
        let result = evaluate(&track, &mut HoverPolicy, &s);
        assert_eq!(
            result.time_s,
            (result.log.len() - 1) as f64 * s.dynamics.dt
        );
    }

    #[test]
    fn conservative_pid_flies_clean_laps_on_circle() {
        let track = circle_track();
        let s = settings();
        let mut policy = PidPolicy::new(
            "pid1",
            crate::pid::PidControllerConfig::conservative(),
            s.dynamics.dt,
        );
        let result = evaluate(&track, &mut policy, &s);
        assert_eq!(result.gates_passed, result.gates_total, "{result:?}");
        assert_eq!(result.resets, 0);
        assert!(!result.aborted);
    }

    #[test]
    fn rescan_matches_live_counts() {
        let track = circle_track();
        let s = settings();
        for policy in [
            &mut PidPolicy::new("pid1", crate::pid::PidControllerConfig::conservative(), s.dynamics.dt)
                as &mut dyn Policy,
            &mut HoverPolicy as &mut dyn Policy,
        ] {
            let result = evaluate(&track, policy, &s);
            let (passed, resets) = rescan_log(&track, &result.log);
            assert_eq!(passed, result.gates_passed);
            assert_eq!(resets, result.resets);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let track = circle_track();
        let s = settings();
        let mut a = PidPolicy::new("pid1", crate::pid::PidControllerConfig::conservative(), s.dynamics.dt);
        let mut b = PidPolicy::new("pid1", crate::pid::PidControllerConfig::conservative(), s.dynamics.dt);
        let ra = evaluate(&track, &mut a, &s);
        let rb = evaluate(&track, &mut b, &s);
        assert_eq!(write_log_csv(&ra.log), write_log_csv(&rb.log));
    }

    struct NanPolicy;
    impl Policy for NanPolicy {
        fn name(&self) -> &str {
            "nan"
        }
        fn reset(&mut self) {}
        fn act(&mut self, _: &WaypointSet, _: &VehicleState, _: ControlCommand) -> ControlCommand {
            ControlCommand {
                throttle: f64::NAN,
                roll: 0.0,
                pitch: 0.0,
                yaw: 0.0,
            }
        }
        fn clone_box(&self) -> Box<dyn Policy> {
            Box::new(NanPolicy)
        }
    }

    #[test]
    fn non_finite_commands_abort_and_flag() {
        let track = circle_track();
        let result = evaluate(&track, &mut NanPolicy, &settings());
        assert!(result.aborted);
        assert_eq!(result.gates_passed, 0);
    }

    #[test]
    fn suite_single_cell_equals_episode() {
        let track = circle_track();
        let s = settings();
        let policies: Vec<Box<dyn Policy>> = vec![Box::new(HoverPolicy)];
        let suite = evaluate_suite(std::slice::from_ref(&track), &policies, &s, 1);
        let single = evaluate(&track, &mut HoverPolicy, &s);
        assert_eq!(suite.cells[0][0].gates_passed, single.gates_passed);
        assert_eq!(suite.cells[0][0].time_s, single.time_s);
        let summary = suite.summary(0);
        assert_eq!(summary.score_pct, 0.0);
        assert_eq!(summary.resets, single.resets as f64);
    }

    #[test]
    fn parallel_suite_matches_sequential() {
        let track = circle_track();
        let s = settings();
        let policies: Vec<Box<dyn Policy>> = vec![
            Box::new(HoverPolicy),
            Box::new(PidPolicy::new(
                "pid1",
                crate::pid::PidControllerConfig::conservative(),
                s.dynamics.dt,
            )),
        ];
        let seq = evaluate_suite(&[track.clone(), circle_track()], &policies, &s, 1);
        let par = evaluate_suite(&[track, circle_track()], &policies, &s, 3);
        for (a, b) in seq.cells.iter().flatten().zip(par.cells.iter().flatten()) {
            assert_eq!(a.gates_passed, b.gates_passed);
            assert_eq!(a.time_s, b.time_s);
            assert_eq!(a.resets, b.resets);
        }
    }

    #[test]
    fn log_csv_round_trip_is_byte_identical() {
        let mut r = rng::stream(31, "log-fuzz");
        let rows: Vec<LogRow> = (0..50)
            .map(|i| LogRow {
                t: i as f64 / 60.0,
                position: Vec3::new(
                    rng::next_f64(&mut r) * 100.0 - 50.0,
                    rng::next_f64(&mut r) * 100.0 - 50.0,
                    rng::next_f64(&mut r) * 10.0,
                ),
                velocity: Vec3::new(
                    rng::next_f64(&mut r) * 30.0,
                    rng::next_f64(&mut r) * 30.0,
                    rng::next_f64(&mut r),
                ),
                yaw: rng::next_f64(&mut r) * 3.0,
                cmd: ControlCommand::new(
                    rng::next_f64(&mut r) * 2.0 - 1.0,
                    rng::next_f64(&mut r) * 2.0 - 1.0,
                    rng::next_f64(&mut r) * 2.0 - 1.0,
                    rng::next_f64(&mut r) * 2.0 - 1.0,
                ),
                on_track: rng::next_f64(&mut r) < 0.9,
                next_gate: (rng::next_f64(&mut r) * 8.0) as usize,
                reset: rng::next_f64(&mut r) < 0.05,
            })
            .collect();
        let text = write_log_csv(&rows);
        let parsed = parse_log_csv(&text).unwrap();
        assert_eq!(rows, parsed);
        assert_eq!(text, write_log_csv(&parsed));
    }

    #[test]
    fn malformed_log_row_errors_with_row_number() {
        let mut text = format!("{LOG_HEADER}\n");
        text.push_str("0,0,0,0,0,0,0,0,0,0,0,0,1,0,0\n");
        text.push_str("bad,0,0,0,0,0,0,0,0,0,0,0,1,0,0\n");
        match parse_log_csv(&text) {
            Err(LogError::Row { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn results_file_round_trip_byte_identical() {
        let file = ResultsFile {
            policy: "pid1".into(),
            tracks: vec![TrackResult {
                name: "circle45".into(),
                gates_passed: 15,
                gates_total: 16,
                time_s: 81.31666666666666,
                resets: 1,
                aborted: false,
            }],
            avg: AvgResult {
                score_pct: 93.75,
                time_s: 81.31666666666666,
                resets: 1.0,
            },
        };
        let text = file.to_json();
        let back = ResultsFile::from_json(&text).unwrap();
        assert_eq!(file, back);
        assert_eq!(text, back.to_json());
    }
}
