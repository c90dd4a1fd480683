//! Seeded random track generation.
//!
//! Tracks are rounded polygons: corner vertices scattered around a
//! circle, each corner filleted with a seeded arc radius, corners joined
//! by straights. That gives race-track geometry with real straightaways
//! and genuinely tight corners, rather than uniformly gentle curvature.

use crate::config::TrackConfig;
use crate::math::Vec3;
use crate::rng;
use crate::track::{Track, TrackError, TrackFile};

/// Deterministically generate a closed-loop track definition.
pub fn generate_track_file(name: &str, seed: u64, cfg: &TrackConfig) -> TrackFile {
    let mut r = rng::stream(seed, "track-gen");
    let k = cfg.corner_count.max(4);

    // Corner vertices: jittered angles and radii around the base circle.
    // Jitter is kept small enough that every polygon edge can host the
    // largest requested fillet without shrinking it.
    let mut vertices: Vec<Vec3> = Vec::with_capacity(k);
    for i in 0..k {
        let slot = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        let jitter = (rng::next_f64(&mut r) - 0.5) * 0.30 * 2.0 * std::f64::consts::PI / k as f64;
        let radius = cfg.base_radius_m * (1.0 + (rng::next_f64(&mut r) - 0.5) * 0.25);
        let a = slot + jitter;
        vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), cfg.altitude_m));
    }
    let fillet_radii: Vec<f64> = (0..k)
        .map(|_| {
            cfg.corner_radius_min_m
                + (cfg.corner_radius_max_m - cfg.corner_radius_min_m) * rng::next_f64(&mut r)
        })
        .collect();

    let control_points = rounded_polygon(&vertices, &fillet_radii, cfg.altitude_m);

    TrackFile {
        name: name.to_string(),
        width_m: cfg.width_m,
        height_m: cfg.height_m,
        closed: true,
        control_points,
        gate_count: cfg.gate_count,
    }
}

/// Fillet every vertex of a closed polygon and emit points along the
/// resulting arcs and straights.
fn rounded_polygon(vertices: &[Vec3], radii: &[f64], altitude: f64) -> Vec<[f64; 3]> {
    let k = vertices.len();
    let planar = |v: &Vec3| (v.x, v.y);

    struct Corner {
        arc_points: Vec<(f64, f64)>,
        exit: (f64, f64),
    }

    // Cap tangent lengths so adjacent fillets never overlap: corner i
    // may claim at most 45% of each edge it touches.
    let mut tangent_caps = vec![f64::INFINITY; k];
    for i in 0..k {
        let (ax, ay) = planar(&vertices[i]);
        let (bx, by) = planar(&vertices[(i + 1) % k]);
        let edge = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        tangent_caps[i] = tangent_caps[i].min(edge * 0.45);
        let j = (i + 1) % k;
        tangent_caps[j] = tangent_caps[j].min(edge * 0.45);
    }

    let mut corners: Vec<Corner> = Vec::with_capacity(k);
    for i in 0..k {
        let prev = planar(&vertices[(i + k - 1) % k]);
        let here = planar(&vertices[i]);
        let next = planar(&vertices[(i + 1) % k]);
        let u = norm2((here.0 - prev.0, here.1 - prev.1));
        let w = norm2((next.0 - here.0, next.1 - here.1));
        let cross = u.0 * w.1 - u.1 * w.0;
        let dot = (u.0 * w.0 + u.1 * w.1).clamp(-1.0, 1.0);
        let turn = cross.atan2(dot); // signed exterior angle

        if turn.abs() < 0.05 {
            // Effectively straight: keep the vertex itself.
            corners.push(Corner {
                arc_points: vec![here],
                exit: here,
            });
            continue;
        }

        let half = (turn.abs() / 2.0).tan();
        // Shrink the fillet if the edges cannot host its tangent length.
        let cap_in = tangent_caps[(i + k - 1) % k];
        let cap_out = tangent_caps[i];
        let mut radius = radii[i];
        let mut d = radius * half;
        let cap = cap_in.min(cap_out);
        if d > cap {
            d = cap;
            radius = d / half;
        }

        let t_in = (here.0 - u.0 * d, here.1 - u.1 * d);
        let t_out = (here.0 + w.0 * d, here.1 + w.1 * d);
        // Arc center: offset from the entry tangent point, toward the
        // inside of the turn.
        let side = turn.signum();
        let n_in = (-u.1 * side, u.0 * side);
        let center = (t_in.0 + n_in.0 * radius, t_in.1 + n_in.1 * radius);

        let start_angle = (t_in.1 - center.1).atan2(t_in.0 - center.0);
        let sweep = turn;
        let arc_len = radius * turn.abs();
        let steps = (arc_len / 7.0).ceil().max(2.0) as usize;
        let mut arc_points = Vec::with_capacity(steps + 1);
        for s in 0..=steps {
            let a = start_angle + sweep * s as f64 / steps as f64;
            arc_points.push((center.0 + radius * a.cos(), center.1 + radius * a.sin()));
        }
        corners.push(Corner {
            exit: t_out,
            arc_points,
        });
    }

    // Assemble: each corner's arc, then intermediate points along the
    // straight to the next corner's arc start.
    let mut out: Vec<[f64; 3]> = Vec::new();
    for i in 0..k {
        let corner = &corners[i];
        for p in &corner.arc_points {
            push_point(&mut out, *p, altitude);
        }
        let next_start = corners[(i + 1) % k].arc_points[0];
        let from = corner.exit;
        let dx = next_start.0 - from.0;
        let dy = next_start.1 - from.1;
        let len = (dx * dx + dy * dy).sqrt();
        let mids = (len / 14.0).floor() as usize;
        for m in 0..=mids {
            let t = m as f64 / (mids + 1) as f64;
            push_point(&mut out, (from.0 + dx * t, from.1 + dy * t), altitude);
        }
    }
    out
}

fn push_point(out: &mut Vec<[f64; 3]>, p: (f64, f64), z: f64) {
    if let Some(last) = out.last() {
        let d = ((last[0] - p.0).powi(2) + (last[1] - p.1).powi(2)).sqrt();
        if d < 2.0 {
            return; // skip near-duplicates so the spline stays well-posed
        }
    }
    out.push([p.0, p.1, z]);
}

fn norm2(v: (f64, f64)) -> (f64, f64) {
    let n = (v.0 * v.0 + v.1 * v.1).sqrt().max(1e-12);
    (v.0 / n, v.1 / n)
}

/// Build a track from explicit control points (fixture path).
pub fn track_file_from_points(name: &str, points: &[[f64; 3]], cfg: &TrackConfig) -> TrackFile {
    TrackFile {
        name: name.to_string(),
        width_m: cfg.width_m,
        height_m: cfg.height_m,
        closed: true,
        control_points: points.to_vec(),
        gate_count: cfg.gate_count,
    }
}

/// Smallest turn radius along the centerline, from discrete curvature.
pub fn min_turn_radius(track: &Track) -> f64 {
    let n = track.samples.len();
    let mut min_r = f64::INFINITY;
    for i in 0..n {
        let a = &track.samples[(i + n - 1) % n];
        let b = &track.samples[i];
        let c = &track.samples[(i + 1) % n];
        // Menger curvature of three consecutive samples (planar).
        let ab = b.position - a.position;
        let bc = c.position - b.position;
        let ac = c.position - a.position;
        let cross = (ab.x * bc.y - ab.y * bc.x).abs();
        let denom = ab.norm() * bc.norm() * ac.norm();
        if denom > 1e-12 && cross > 1e-12 {
            let curvature = 2.0 * cross / denom;
            min_r = min_r.min(1.0 / curvature);
        }
    }
    min_r
}

pub fn build_generated(name: &str, seed: u64, cfg: &TrackConfig) -> Result<Track, TrackError> {
    let file = generate_track_file(name, seed, cfg);
    Track::from_file_with_gates(&file, cfg.gate_half_width, cfg.gate_half_height)
}
