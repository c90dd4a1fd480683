//! Online fusion training loop.
//!
//! Two demonstrators take turns driving. Every state-action pair enters
//! the active demonstrator's temporary FIFO buffer; a pair graduates to
//! the training database only after the vehicle has stayed on track for
//! the buffer's whole horizon, and any off-track step flushes the buffer
//! wholesale. Before the demonstrators take over, a bootstrap phase lets
//! the noisy network drive while the conservative demonstrator supplies
//! the labels. One mini-batch SGD update runs per simulation step.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::dynamics::{self, ControlCommand, DynamicsError, VehicleState};
use crate::neural::{
    adam_step, AdamState, ForwardScratch, Gradients, Mode, OuNoise, PolicyNet, INPUT_DIM,
    OUTPUT_DIM,
};
use crate::oracle::{WaypointOracle, WaypointSet};
use crate::pid::PidController;
use crate::rng;
use crate::track::{Gate, Track};

/// One state-action pair awaiting its survival verdict.
#[derive(Clone, Copy, Debug)]
pub struct Demonstration {
    pub state_vec: [f64; INPUT_DIM],
    pub action: [f64; OUTPUT_DIM],
    pub step_index: u64,
}

/// FIFO buffer with horizon `capacity` (k). Entries older than the
/// horizon graduate; any off-track step clears everything pending.
#[derive(Clone, Debug)]
pub struct TemporaryBuffer {
    entries: VecDeque<Demonstration>,
    pub capacity: usize,
    last_index: Option<u64>,
}

impl TemporaryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity + 1),
            capacity,
            last_index: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drop all pending entries (episode end), returning how many died.
    pub fn discard_all(&mut self) -> usize {
        let n = self.entries.len();
        self.entries.clear();
        n
    }
}

/// The distilled demonstration set used for mini-batch SGD.
#[derive(Clone, Debug)]
pub struct TrainingDatabase {
    samples: Vec<Demonstration>,
    capacity: Option<usize>,
    write_cursor: usize,
}

impl TrainingDatabase {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            samples: Vec::new(),
            capacity,
            write_cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Demonstration] {
        &self.samples
    }

    fn push(&mut self, d: Demonstration) {
        match self.capacity {
            Some(cap) if self.samples.len() >= cap => {
                // Ring overwrite of the oldest slot.
                self.samples[self.write_cursor] = d;
                self.write_cursor = (self.write_cursor + 1) % cap;
            }
            _ => self.samples.push(d),
        }
    }

    pub fn sample_index(&self, rng: &mut ChaCha8Rng) -> usize {
        rng::next_index(rng, self.samples.len())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BufferError {
    #[error("out-of-order demonstration: step {got} after {last}")]
    OutOfOrder { last: u64, got: u64 },
}

/// What one buffer update did.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BufferOutcome {
    pub committed: usize,
    pub discarded: usize,
}

/// One step of the buffering strategy.
///
/// The entry is appended first. If the vehicle ended the step off track
/// the whole buffer (entry included) is discarded; otherwise entries
/// beyond the horizon graduate oldest-first into the database. An entry
/// recorded at step t therefore reaches the database at step t+k exactly
/// when every step of [t, t+k] stayed on track.
pub fn buffer_step(
    buffer: &mut TemporaryBuffer,
    entry: Demonstration,
    on_track_after_step: bool,
    db: &mut TrainingDatabase,
) -> Result<BufferOutcome, BufferError> {
    if let Some(last) = buffer.last_index {
        if entry.step_index <= last {
            return Err(BufferError::OutOfOrder {
                last,
                got: entry.step_index,
            });
        }
    }
    buffer.last_index = Some(entry.step_index);
    buffer.entries.push_back(entry);

    let mut outcome = BufferOutcome::default();
    if !on_track_after_step {
        outcome.discarded = buffer.entries.len();
        buffer.entries.clear();
    } else {
        while buffer.entries.len() > buffer.capacity {
            let oldest = buffer.entries.pop_front().expect("nonempty");
            db.push(oldest);
            outcome.committed += 1;
        }
    }
    Ok(outcome)
}

/// Concatenate the policy input: 5 body-frame waypoints, body-frame
/// velocity, and the previous step's yaw-rate command.
pub fn assemble_state(
    wps: &WaypointSet,
    state: &VehicleState,
    last_cmd: &ControlCommand,
) -> [f64; INPUT_DIM] {
    assert_eq!(
        wps.points.len(),
        5,
        "policy input layout expects 5 waypoints"
    );
    let mut v = [0.0; INPUT_DIM];
    for (i, p) in wps.points.iter().enumerate() {
        v[3 * i] = p.x;
        v[3 * i + 1] = p.y;
        v[3 * i + 2] = p.z;
    }
    let bv = state.body_velocity();
    v[15] = bv.x;
    v[16] = bv.y;
    v[17] = bv.z;
    v[18] = last_cmd.yaw;
    v
}

/// Evaluate the policy network on the assembled state.
pub fn act(
    net: &PolicyNet,
    wps: &WaypointSet,
    state: &VehicleState,
    last_cmd: ControlCommand,
) -> ControlCommand {
    ControlCommand::from_array(net.infer(&assemble_state(wps, state, &last_cmd)))
}

/// A demonstrator that can drive episodes and label states.
pub trait Demonstrator {
    fn act(&mut self, wps: &WaypointSet, state: &VehicleState, dt: f64) -> ControlCommand;
    fn reset(&mut self);
}

impl Demonstrator for PidController {
    fn act(&mut self, wps: &WaypointSet, state: &VehicleState, dt: f64) -> ControlCommand {
        PidController::act(self, wps, state, dt)
    }
    fn reset(&mut self) {
        PidController::reset(self);
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LossPoint {
    pub sgd_update: u64,
    pub loss: f64,
    pub db_size: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrainingReport {
    pub total_sim_steps: u64,
    pub explore_steps_run: u64,
    pub episodes_per_controller: usize,
    pub sgd_updates: u64,
    pub final_db_size: usize,
    /// Demonstrations committed to the database, per controller index.
    pub committed: [u64; 2],
    /// Demonstrations discarded by the buffer strategy, per controller.
    pub discarded: [u64; 2],
    /// Pending entries dropped at episode ends, per controller.
    pub episode_leftovers: [u64; 2],
    pub explore_committed: u64,
    pub explore_discarded: u64,
    pub offtrack_resets: u64,
    pub final_loss: Option<f64>,
    pub loss_curve: Vec<LossPoint>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training needs at least one track")]
    NoTracks,
    #[error("training needs count = 5 oracle waypoints, got {0}")]
    BadOracleCount(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(
        "non-finite loss at sim step {sim_step} (update {sgd_updates}, |D| = {db_size}); \
         aborted before corrupting the model"
    )]
    NonFiniteLoss {
        sim_step: u64,
        sgd_updates: u64,
        db_size: usize,
    },
}

fn gate_heading(gate: &Gate) -> f64 {
    gate.normal.y.atan2(gate.normal.x)
}

pub fn start_pose(track: &Track) -> VehicleState {
    start_pose_at_gate(track, 0)
}

/// Rest pose on a gate's centerline point, heading along the tangent.
pub fn start_pose_at_gate(track: &Track, gate_index: usize) -> VehicleState {
    let gate = &track.gates[gate_index % track.gates.len()];
    dynamics::reset_to(gate.center, gate_heading(gate))
}

struct SgdContext<'a> {
    net: &'a mut PolicyNet,
    opt: &'a mut AdamState,
    sampler: ChaCha8Rng,
    dropout: ChaCha8Rng,
    weights: crate::neural::LossWeights,
    batch_size: usize,
    stride: usize,
    updates: u64,
    last_loss: Option<f64>,
    curve: Vec<LossPoint>,
    grads: Gradients,
    scratch: ForwardScratch,
}

impl SgdContext<'_> {
    fn update(&mut self, db: &TrainingDatabase, sim_step: u64) -> Result<(), TrainError> {
        let scale = 1.0 / self.batch_size as f64;
        self.grads.zero();
        let mut loss = 0.0;
        for _ in 0..self.batch_size {
            let idx = db.sample_index(&mut self.sampler);
            let d = &db.samples()[idx];
            loss += self.net.accumulate_loss_and_grad(
                &d.state_vec,
                &d.action,
                &self.weights,
                Some(&mut self.dropout),
                &mut self.scratch,
                &mut self.grads,
            ) * scale;
        }
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                sim_step,
                sgd_updates: self.updates,
                db_size: db.len(),
            });
        }
        self.grads.scale(scale);
        adam_step(self.net, &self.grads, self.opt);
        self.updates += 1;
        self.last_loss = Some(loss);
        if self.updates % self.stride as u64 == 0 {
            self.curve.push(LossPoint {
                sgd_update: self.updates,
                loss,
                db_size: db.len(),
            });
        }
        Ok(())
    }
}

/// Train a policy with the stock PID demonstrators from the config.
pub fn train(tracks: &[Track], cfg: &RunConfig) -> Result<(PolicyNet, TrainingReport), TrainError> {
    let mut conservative = PidController::new(cfg.pid.conservative);
    let mut aggressive = PidController::new(cfg.pid.aggressive);
    train_with_demonstrators(tracks, cfg, &mut conservative, &mut aggressive)
}

/// Same loop with arbitrary demonstrators (the conservative one also
/// labels the bootstrap phase).
pub fn train_with_demonstrators(
    tracks: &[Track],
    cfg: &RunConfig,
    conservative: &mut dyn Demonstrator,
    aggressive: &mut dyn Demonstrator,
) -> Result<(PolicyNet, TrainingReport), TrainError> {
    if tracks.is_empty() {
        return Err(TrainError::NoTracks);
    }
    if cfg.oracle.count != 5 {
        return Err(TrainError::BadOracleCount(cfg.oracle.count));
    }
    let dt = cfg.dynamics.dt;

    let mut init_rng = rng::stream(cfg.seed, "net-init");
    let mut net = PolicyNet::random(&cfg.neural.hidden, cfg.neural.dropout_rate, &mut init_rng);
    net.set_mode(Mode::Train);
    let mut opt = AdamState::new(&net, cfg.neural.adam);

    let mut report = TrainingReport {
        episodes_per_controller: cfg.trainer.episodes_per_controller,
        ..TrainingReport::default()
    };
    if cfg.trainer.episodes_per_controller == 0 {
        net.set_mode(Mode::Eval);
        return Ok((net, report));
    }

    let mut db = TrainingDatabase::new(cfg.trainer.db_capacity);
    let mut buffers = [
        TemporaryBuffer::new(cfg.trainer.buffer_k1),
        TemporaryBuffer::new(cfg.trainer.buffer_k2),
    ];
    let mut oracle = WaypointOracle::new(cfg.oracle, cfg.seed);
    let mut ou = OuNoise::new(cfg.neural.ou, rng::stream(cfg.seed, "ou"));
    let mut global_step: u64 = 0;

    let grads = Gradients::zeros_like(&net);
    let scratch = ForwardScratch::for_net(&net);
    let mut sgd = SgdContext {
        net: &mut net,
        opt: &mut opt,
        sampler: rng::stream(cfg.seed, "sampler"),
        dropout: rng::stream(cfg.seed, "dropout"),
        weights: cfg.neural.loss_weights,
        batch_size: cfg.trainer.batch_size,
        stride: cfg.trainer.loss_curve_stride,
        updates: 0,
        last_loss: None,
        curve: Vec::new(),
        grads,
        scratch,
    };

    // Bootstrap phase: the noisy network drives on the first track while
    // the conservative demonstrator labels every state; pairs flow
    // through the k1 buffer like any other demonstration.
    {
        let track = &tracks[0];
        let mut state = start_pose(track);
        let mut last_cmd = ControlCommand::ZERO;
        conservative.reset();
        for _ in 0..cfg.trainer.explore_steps {
            let wps = oracle.waypoints(track, &state);
            let svec = assemble_state(&wps, &state, &last_cmd);
            let label = conservative.act(&wps, &state, dt);
            let noise = ou.sample();
            let raw = sgd.net.infer(&svec);
            let exec = ControlCommand::new(
                raw[0] + noise[0],
                raw[1] + noise[1],
                raw[2] + noise[2],
                raw[3] + noise[3],
            );
            let next = dynamics::step(&state, exec, &cfg.dynamics)?;
            global_step += 1;
            report.total_sim_steps += 1;
            report.explore_steps_run += 1;

            let proj = track.project(&next.position);
            let on = proj.lateral_offset.abs() <= track.width / 2.0
                && proj.vertical_offset.abs() <= track.height / 2.0;
            let outcome = buffer_step(
                &mut buffers[0],
                Demonstration {
                    state_vec: svec,
                    action: label.as_array(),
                    step_index: global_step,
                },
                on,
                &mut db,
            )?;
            report.explore_committed += outcome.committed as u64;
            report.explore_discarded += outcome.discarded as u64;

            if db.len() >= cfg.trainer.batch_size
                && global_step % cfg.trainer.sim_steps_per_update as u64 == 0
            {
                sgd.update(&db, global_step)?;
            }

            if on {
                state = next;
                last_cmd = exec;
            } else {
                let gate = track.next_gate_ahead(proj.arc_length);
                state = dynamics::reset_to(gate.center, gate_heading(gate));
                last_cmd = ControlCommand::ZERO;
                conservative.reset();
                report.offtrack_resets += 1;
            }
        }
        buffers[0].discard_all();
    }

    // Demonstration phase: controllers alternate episodes, cycling tracks.
    let mut episode_counter = 0usize;
    for _round in 0..cfg.trainer.episodes_per_controller {
        for ctrl_idx in 0..2usize {
            let track = &tracks[episode_counter % tracks.len()];
            episode_counter += 1;
            let demo: &mut dyn Demonstrator = if ctrl_idx == 0 {
                &mut *conservative
            } else {
                &mut *aggressive
            };
            demo.reset();
            // Rotate episode start gates so step-capped episodes still
            // cover the whole track across the run.
            let start_gate = episode_counter % track.gates.len();
            let mut state = start_pose_at_gate(track, start_gate);
            let mut last_cmd = ControlCommand::ZERO;
            let mut progress = 0.0;
            let mut prev_arc = track.gates[start_gate].arc_length;
            let goal = cfg.trainer.laps_per_episode as f64 * track.total_length;

            for _ in 0..cfg.trainer.max_steps_per_episode {
                let wps = oracle.waypoints(track, &state);
                let svec = assemble_state(&wps, &state, &last_cmd);
                let action = demo.act(&wps, &state, dt);
                let next = dynamics::step(&state, action, &cfg.dynamics)?;
                global_step += 1;
                report.total_sim_steps += 1;

                let proj = track.project(&next.position);
                let on = proj.lateral_offset.abs() <= track.width / 2.0
                    && proj.vertical_offset.abs() <= track.height / 2.0;
                let outcome = buffer_step(
                    &mut buffers[ctrl_idx],
                    Demonstration {
                        state_vec: svec,
                        action: action.as_array(),
                        step_index: global_step,
                    },
                    on,
                    &mut db,
                )?;
                report.committed[ctrl_idx] += outcome.committed as u64;
                report.discarded[ctrl_idx] += outcome.discarded as u64;

                if db.len() >= cfg.trainer.batch_size
                    && global_step % cfg.trainer.sim_steps_per_update as u64 == 0
                {
                    sgd.update(&db, global_step)?;
                }

                let mut delta = proj.arc_length - prev_arc;
                if delta < -track.total_length / 2.0 {
                    delta += track.total_length;
                } else if delta > track.total_length / 2.0 {
                    delta -= track.total_length;
                }

                if on {
                    progress += delta.max(0.0);
                    prev_arc = proj.arc_length;
                    state = next;
                    last_cmd = action;
                } else {
                    let gate = track.next_gate_ahead(proj.arc_length);
                    let mut jump = gate.arc_length - prev_arc;
                    if jump < 0.0 {
                        jump += track.total_length;
                    }
                    progress += jump;
                    prev_arc = gate.arc_length;
                    state = dynamics::reset_to(gate.center, gate_heading(gate));
                    last_cmd = ControlCommand::ZERO;
                    demo.reset();
                    report.offtrack_resets += 1;
                }

                if progress >= goal {
                    break;
                }
            }
            report.episode_leftovers[ctrl_idx] += buffers[ctrl_idx].discard_all() as u64;
        }
    }

    report.sgd_updates = sgd.updates;
    report.final_db_size = db.len();
    report.final_loss = sgd.last_loss;
    report.loss_curve = std::mem::take(&mut sgd.curve);
    net.set_mode(Mode::Eval);
    Ok((net, report))
}
