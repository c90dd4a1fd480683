//! Closed race-track geometry.
//!
//! A track is a closed centripetal Catmull-Rom spline through its control
//! points, resampled by arc length into a dense polyline with tangents.
//! The corridor is a constant-width, constant-height box around that
//! centerline; gates are rectangles placed at uniform arc-length
//! intervals, oriented along the local tangent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{planar_norm, Vec3};

/// Nominal arc-length spacing of centerline samples, meters.
pub const SAMPLE_SPACING: f64 = 0.5;

/// Default gate rectangle: 3 m wide, 2.5 m tall.
pub const DEFAULT_GATE_HALF_WIDTH: f64 = 1.5;
pub const DEFAULT_GATE_HALF_HEIGHT: f64 = 1.25;

#[derive(Clone, Copy, Debug)]
pub struct CenterlineSample {
    pub position: Vec3,
    /// Unit tangent, pointing along the direction of travel.
    pub tangent: Vec3,
}

#[derive(Clone, Copy, Debug)]
pub struct Gate {
    pub index: usize,
    /// Arc length of the gate plane along the centerline, meters.
    pub arc_length: f64,
    pub center: Vec3,
    /// Unit tangent of the centerline at the gate (the plane normal).
    pub normal: Vec3,
    pub half_width: f64,
    pub half_height: f64,
}

/// Result of projecting a world point onto the centerline.
#[derive(Clone, Copy, Debug)]
pub struct TrackProjection {
    pub arc_length: f64,
    /// Signed planar offset, positive to the left of the travel direction.
    pub lateral_offset: f64,
    /// Signed vertical offset above the centerline.
    pub vertical_offset: f64,
}

#[derive(Clone, Debug)]
pub struct Track {
    pub name: String,
    /// Full corridor width, meters.
    pub width: f64,
    /// Full corridor height, meters.
    pub height: f64,
    pub control_points: Vec<Vec3>,
    pub samples: Vec<CenterlineSample>,
    /// Actual spacing between consecutive samples (within 1% of SAMPLE_SPACING).
    pub sample_spacing: f64,
    pub total_length: f64,
    pub gates: Vec<Gate>,
    /// Smallest planar distance between non-adjacent centerline samples,
    /// for warning about corridors that fold onto themselves.
    pub min_self_clearance: f64,
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track needs at least 4 control points, got {0}")]
    TooFewControlPoints(usize),
    #[error("track width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("track height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("gate count must be at least 1")]
    NoGates,
    #[error("degenerate control polygon: points {0} and {1} coincide")]
    DegenerateControlPoints(usize, usize),
    #[error("control point {0} contains non-finite coordinates")]
    NonFiniteControlPoint(usize),
    #[error("track loop too short for {SAMPLE_SPACING} m sampling (length {0:.3} m)")]
    LoopTooShort(f64),
    #[error("track file must declare \"closed\": true")]
    NotClosed,
    #[error("failed to parse track file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// On-disk track definition. Gates and samples are derived on load.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrackFile {
    pub name: String,
    pub width_m: f64,
    pub height_m: f64,
    pub closed: bool,
    pub control_points: Vec<[f64; 3]>,
    pub gate_count: usize,
}

impl TrackFile {
    pub fn from_json(text: &str) -> Result<Self, TrackError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("track file serializes");
        s.push('\n');
        s
    }
}

/// Evaluate one centripetal Catmull-Rom segment (Barry-Goldman pyramid).
/// `t` runs over [0, 1] between p1 and p2.
fn catmull_rom(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3, t: f64) -> Vec3 {
    let knot = |a: &Vec3, b: &Vec3| (b - a).norm().sqrt(); // alpha = 0.5
    let t0 = 0.0;
    let t1 = t0 + knot(&p0, &p1);
    let t2 = t1 + knot(&p1, &p2);
    let t3 = t2 + knot(&p2, &p3);
    let u = t1 + t * (t2 - t1);

    let lerp = |a: Vec3, b: Vec3, ta: f64, tb: f64| -> Vec3 {
        if tb - ta <= f64::EPSILON {
            return a;
        }
        a * ((tb - u) / (tb - ta)) + b * ((u - ta) / (tb - ta))
    };
    let a1 = lerp(p0, p1, t0, t1);
    let a2 = lerp(p1, p2, t1, t2);
    let a3 = lerp(p2, p3, t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

impl Track {
    /// Build a track from a file definition with default gate dimensions.
    pub fn from_file(file: &TrackFile) -> Result<Self, TrackError> {
        Self::from_file_with_gates(file, DEFAULT_GATE_HALF_WIDTH, DEFAULT_GATE_HALF_HEIGHT)
    }

    pub fn from_file_with_gates(
        file: &TrackFile,
        gate_half_width: f64,
        gate_half_height: f64,
    ) -> Result<Self, TrackError> {
        if !file.closed {
            return Err(TrackError::NotClosed);
        }
        let points: Vec<Vec3> = file
            .control_points
            .iter()
            .map(|p| Vec3::new(p[0], p[1], p[2]))
            .collect();
        Self::build(
            &file.name,
            &points,
            file.width_m,
            file.height_m,
            file.gate_count,
            gate_half_width,
            gate_half_height,
        )
    }

    pub fn build(
        name: &str,
        control_points: &[Vec3],
        width: f64,
        height: f64,
        gate_count: usize,
        gate_half_width: f64,
        gate_half_height: f64,
    ) -> Result<Self, TrackError> {
        let n = control_points.len();
        if n < 4 {
            return Err(TrackError::TooFewControlPoints(n));
        }
        if width <= 0.0 {
            return Err(TrackError::NonPositiveWidth(width));
        }
        if height <= 0.0 {
            return Err(TrackError::NonPositiveHeight(height));
        }
        if gate_count == 0 {
            return Err(TrackError::NoGates);
        }
        for (i, p) in control_points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(TrackError::NonFiniteControlPoint(i));
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if (control_points[j] - control_points[i]).norm() < 1e-9 {
                return Err(TrackError::DegenerateControlPoints(i, j));
            }
        }

        // Dense parametric sweep of the closed spline, then resample
        // uniformly by arc length.
        const SUBDIV: usize = 256;
        let mut dense: Vec<Vec3> = Vec::with_capacity(n * SUBDIV + 1);
        for seg in 0..n {
            let p0 = control_points[(seg + n - 1) % n];
            let p1 = control_points[seg];
            let p2 = control_points[(seg + 1) % n];
            let p3 = control_points[(seg + 2) % n];
            for k in 0..SUBDIV {
                dense.push(catmull_rom(p0, p1, p2, p3, k as f64 / SUBDIV as f64));
            }
        }
        dense.push(dense[0]); // close the loop

        let mut cumulative = Vec::with_capacity(dense.len());
        cumulative.push(0.0);
        for w in dense.windows(2) {
            let d = (w[1] - w[0]).norm();
            cumulative.push(cumulative.last().unwrap() + d);
        }
        let total_length = *cumulative.last().unwrap();
        let sample_count = (total_length / SAMPLE_SPACING).ceil() as usize;
        if sample_count < 8 {
            return Err(TrackError::LoopTooShort(total_length));
        }
        let spacing = total_length / sample_count as f64;
        if (spacing - SAMPLE_SPACING).abs() / SAMPLE_SPACING > 0.01 {
            return Err(TrackError::LoopTooShort(total_length));
        }

        let mut positions = Vec::with_capacity(sample_count);
        let mut cursor = 0usize;
        for i in 0..sample_count {
            let target = i as f64 * spacing;
            while cursor + 1 < cumulative.len() - 1 && cumulative[cursor + 1] < target {
                cursor += 1;
            }
            let seg_len = cumulative[cursor + 1] - cumulative[cursor];
            let t = if seg_len > 0.0 {
                (target - cumulative[cursor]) / seg_len
            } else {
                0.0
            };
            positions.push(dense[cursor] * (1.0 - t) + dense[cursor + 1] * t);
        }

        let samples: Vec<CenterlineSample> = (0..sample_count)
            .map(|i| {
                let prev = positions[(i + sample_count - 1) % sample_count];
                let next = positions[(i + 1) % sample_count];
                let tangent = (next - prev)
                    .try_normalize(1e-12)
                    .unwrap_or_else(|| Vec3::new(1.0, 0.0, 0.0));
                CenterlineSample {
                    position: positions[i],
                    tangent,
                }
            })
            .collect();

        // Gates at uniform arc-length intervals, snapped to samples.
        let gates: Vec<Gate> = (0..gate_count)
            .map(|g| {
                let s = g as f64 * total_length / gate_count as f64;
                let idx = ((s / spacing).round() as usize) % sample_count;
                Gate {
                    index: g,
                    arc_length: idx as f64 * spacing,
                    center: samples[idx].position,
                    normal: samples[idx].tangent,
                    half_width: gate_half_width,
                    half_height: gate_half_height,
                }
            })
            .collect();

        // Self-proximity heuristic: planar distance between samples far
        // apart along the loop.
        let mut min_self_clearance = f64::INFINITY;
        let guard = (2.0 * width / spacing).ceil() as usize;
        let stride = 4; // coarse scan is enough for a warning
        for i in (0..sample_count).step_by(stride) {
            for j in (i..sample_count).step_by(stride) {
                let along = (j - i).min(sample_count - (j - i));
                if along <= guard {
                    continue;
                }
                let d = planar_norm(&(samples[j].position - samples[i].position));
                if d < min_self_clearance {
                    min_self_clearance = d;
                }
            }
        }

        Ok(Self {
            name: name.to_string(),
            width,
            height,
            control_points: control_points.to_vec(),
            samples,
            sample_spacing: spacing,
            total_length,
            gates,
            min_self_clearance,
        })
    }

    /// True if the corridor approaches itself closer than its own width.
    pub fn self_overlap_warning(&self) -> bool {
        self.min_self_clearance < self.width
    }

    /// Interpolated centerline point at an arbitrary arc length (wrapped).
    pub fn point_at(&self, arc_length: f64) -> Vec3 {
        let n = self.samples.len();
        let s = arc_length.rem_euclid(self.total_length);
        let f = s / self.sample_spacing;
        let i = (f.floor() as usize) % n;
        let t = f - f.floor();
        let a = self.samples[i].position;
        let b = self.samples[(i + 1) % n].position;
        a * (1.0 - t) + b * t
    }

    /// Interpolated unit tangent at an arbitrary arc length (wrapped).
    pub fn tangent_at(&self, arc_length: f64) -> Vec3 {
        let n = self.samples.len();
        let s = arc_length.rem_euclid(self.total_length);
        let f = s / self.sample_spacing;
        let i = (f.floor() as usize) % n;
        let t = f - f.floor();
        let a = self.samples[i].tangent;
        let b = self.samples[(i + 1) % n].tangent;
        (a * (1.0 - t) + b * t)
            .try_normalize(1e-12)
            .unwrap_or(a)
    }

    /// Project a world point onto the centerline.
    ///
    /// Nearest-sample scan refined by projecting onto the two adjacent
    /// polyline segments. Total: any finite point projects somewhere.
    pub fn project(&self, position: &Vec3) -> TrackProjection {
        let n = self.samples.len();
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            let dx = position.x - s.position.x;
            let dy = position.y - s.position.y;
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }

        let mut out: Option<(f64, TrackProjection)> = None;
        for &start in &[(best + n - 1) % n, best] {
            let a = &self.samples[start];
            let b = &self.samples[(start + 1) % n];
            let seg = b.position - a.position;
            let seg_xy2 = seg.x * seg.x + seg.y * seg.y;
            let t = if seg_xy2 > 1e-18 {
                (((position.x - a.position.x) * seg.x + (position.y - a.position.y) * seg.y)
                    / seg_xy2)
                    .clamp(0.0, 1.0)
            } else {
                0.0
            };
            let foot = a.position + seg * t;
            let delta = position - foot;
            let planar_d = planar_norm(&delta);
            if out.as_ref().map_or(true, |(d, _)| planar_d < *d) {
                let tangent = seg
                    .try_normalize(1e-12)
                    .unwrap_or(a.tangent);
                let th = planar_norm(&tangent).max(1e-12);
                // Left of travel in the horizontal plane.
                let left = Vec3::new(-tangent.y / th, tangent.x / th, 0.0);
                let lateral = delta.x * left.x + delta.y * left.y;
                let arc = (start as f64 + t) * self.sample_spacing;
                out = Some((
                    planar_d,
                    TrackProjection {
                        arc_length: arc.rem_euclid(self.total_length),
                        lateral_offset: lateral,
                        vertical_offset: delta.z,
                    },
                ));
            }
        }
        out.expect("projection candidates nonempty").1
    }

    pub fn is_on_track(&self, position: &Vec3) -> bool {
        let p = self.project(position);
        p.lateral_offset.abs() <= self.width / 2.0 && p.vertical_offset.abs() <= self.height / 2.0
    }

    /// First gate strictly ahead of the given arc length (wrapping).
    pub fn next_gate_ahead(&self, arc_length: f64) -> &Gate {
        let s = arc_length.rem_euclid(self.total_length);
        self.gates
            .iter()
            .find(|g| g.arc_length > s + 1e-9)
            .unwrap_or(&self.gates[0])
    }
}

/// Did the motion from `p_prev` to `p_next` cross the gate, moving in the
/// forward (tangent) direction, inside the gate rectangle?
pub fn gate_crossed(gate: &Gate, p_prev: &Vec3, p_next: &Vec3) -> bool {
    let d0 = (p_prev - gate.center).dot(&gate.normal);
    let d1 = (p_next - gate.center).dot(&gate.normal);
    if !(d0 < 0.0 && d1 >= 0.0) {
        return false;
    }
    let t = d0 / (d0 - d1);
    let hit = p_prev + (p_next - p_prev) * t;
    let u = hit - gate.center;
    let nh = planar_norm(&gate.normal);
    if nh < 1e-12 {
        return false;
    }
    let left = Vec3::new(-gate.normal.y / nh, gate.normal.x / nh, 0.0);
    let up = gate.normal.cross(&left);
    u.dot(&left).abs() <= gate.half_width && u.dot(&up).abs() <= gate.half_height
}
