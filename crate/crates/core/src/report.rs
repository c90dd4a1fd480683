//! Static artifacts: top-down SVG trajectory renders with speed
//! heatmaps, and Markdown result tables.

use serde::{Deserialize, Serialize};

use crate::evaluator::{LogRow, SuiteResult};
use crate::math::Vec3;
use crate::track::Track;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSpec {
    pub canvas_width_px: u32,
    /// World-space margin around the track bounds, meters.
    pub margin_m: f64,
    pub trajectory_stroke_px: f64,
    pub corridor_stroke_px: f64,
    pub gate_stroke_px: f64,
    /// Optional fixed speed scale [min, max] m/s; default is per-figure.
    pub fixed_speed_scale: Option<[f64; 2]>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            canvas_width_px: 900,
            margin_m: 10.0,
            trajectory_stroke_px: 2.0,
            corridor_stroke_px: 1.0,
            gate_stroke_px: 2.5,
            fixed_speed_scale: None,
        }
    }
}

/// Speed to color: blue at the scale minimum, red at the maximum.
fn heat_color(speed: f64, vmin: f64, vmax: f64) -> String {
    let t = if vmax > vmin {
        ((speed - vmin) / (vmax - vmin)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

struct Mapper {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Mapper {
    fn to_px(&self, p: &Vec3) -> (f64, f64) {
        (
            (p.x - self.min_x) * self.scale,
            (self.max_y - p.y) * self.scale,
        )
    }
}

/// Render the track corridor, gates, and a speed-colored trajectory as a
/// standalone SVG document. Pure: same inputs, same bytes.
pub fn render_trajectory(track: &Track, rows: &[LogRow], spec: &RenderSpec) -> String {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut extend = |p: &Vec3, pad: f64| {
        min_x = min_x.min(p.x - pad);
        max_x = max_x.max(p.x + pad);
        min_y = min_y.min(p.y - pad);
        max_y = max_y.max(p.y + pad);
    };
    for s in &track.samples {
        extend(&s.position, track.width / 2.0);
    }
    for r in rows {
        extend(&r.position, 0.0);
    }
    min_x -= spec.margin_m;
    max_x += spec.margin_m;
    min_y -= spec.margin_m;
    max_y += spec.margin_m;

    let scale = spec.canvas_width_px as f64 / (max_x - min_x);
    let height = ((max_y - min_y) * scale).ceil();
    let map = Mapper {
        min_x,
        max_y,
        scale,
    };

    let mut svg = String::with_capacity(rows.len() * 96 + 16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n",
        spec.canvas_width_px, height, spec.canvas_width_px, height
    ));
    svg.push_str(&format!(
        "<title>{} trajectory</title>\n",
        xml_escape(&track.name)
    ));

    // Corridor edges.
    for side in [-1.0, 1.0] {
        let mut points = String::new();
        for s in &track.samples {
            let left = left_of(&s.tangent);
            let p = s.position + left * (side * track.width / 2.0);
            let (x, y) = map.to_px(&p);
            points.push_str(&format!("{x:.2},{y:.2} "));
        }
        if let Some(first) = track.samples.first() {
            let left = left_of(&first.tangent);
            let p = first.position + left * (side * track.width / 2.0);
            let (x, y) = map.to_px(&p);
            points.push_str(&format!("{x:.2},{y:.2}"));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#b0b0b0\" stroke-width=\"{}\" points=\"{}\"/>\n",
            spec.corridor_stroke_px,
            points.trim_end()
        ));
    }

    // Gates in red.
    for gate in &track.gates {
        let left = left_of(&gate.normal);
        let a = gate.center + left * gate.half_width;
        let b = gate.center - left * gate.half_width;
        let (x1, y1) = map.to_px(&a);
        let (x2, y2) = map.to_px(&b);
        svg.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#dd2222\" stroke-width=\"{}\"/>\n",
            spec.gate_stroke_px
        ));
    }

    // Trajectory, one segment per step, colored by instantaneous speed.
    if rows.len() > 1 {
        let (vmin, vmax) = match spec.fixed_speed_scale {
            Some([lo, hi]) => (lo, hi),
            None => {
                let speeds: Vec<f64> = rows.iter().map(|r| r.velocity.norm()).collect();
                (
                    speeds.iter().cloned().fold(f64::INFINITY, f64::min),
                    speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            }
        };
        for i in 1..rows.len() {
            let (x1, y1) = map.to_px(&rows[i - 1].position);
            let (x2, y2) = map.to_px(&rows[i].position);
            if rows[i].reset {
                // Teleport: a dashed gap instead of a flown segment.
                svg.push_str(&format!(
                    "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#999999\" stroke-width=\"{}\" stroke-dasharray=\"5 4\"/>\n",
                    spec.trajectory_stroke_px
                ));
            } else {
                let color = heat_color(rows[i].velocity.norm(), vmin, vmax);
                svg.push_str(&format!(
                    "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"{}\"/>\n",
                    spec.trajectory_stroke_px
                ));
            }
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn left_of(tangent: &Vec3) -> Vec3 {
    let n = (tangent.x * tangent.x + tangent.y * tangent.y).sqrt().max(1e-12);
    Vec3::new(-tangent.y / n, tangent.x / n, 0.0)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Markdown table in the score/time/resets layout: one row per track,
/// three columns per policy, and a final pooled "Avg." row.
pub fn render_table(suite: &SuiteResult) -> String {
    let mut out = String::new();
    out.push_str("| Track |");
    for name in &suite.policy_names {
        out.push_str(&format!(" {name} Score | {name} Time | {name} Resets |"));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &suite.policy_names {
        out.push_str("---|---|---|");
    }
    out.push('\n');

    for (t, track) in suite.track_names.iter().enumerate() {
        out.push_str(&format!("| {track} |"));
        for p in 0..suite.policy_names.len() {
            let cell = &suite.cells[p][t];
            out.push_str(&format!(
                " {}/{} | {:.2} | {} |",
                cell.gates_passed, cell.gates_total, cell.time_s, cell.resets
            ));
        }
        out.push('\n');
    }

    out.push_str("| Avg. |");
    for p in 0..suite.policy_names.len() {
        let s = suite.summary(p);
        out.push_str(&format!(
            " {:.2}% | {:.2} | {:.2} |",
            s.score_pct, s.time_s, s.resets
        ));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlCommand;
    use crate::evaluator::EpisodeResult;

    fn test_track() -> Track {
        let n = 24;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vec3::new(40.0 * a.cos(), 40.0 * a.sin(), 5.0)
            })
            .collect();
        Track::build("render-test", &pts, 10.0, 5.0, 4, 1.5, 1.25).unwrap()
    }

    fn row(x: f64, speed: f64, reset: bool) -> LogRow {
        LogRow {
            t: x / 60.0,
            position: Vec3::new(x, 0.0, 5.0),
            velocity: Vec3::new(speed, 0.0, 0.0),
            yaw: 0.0,
            cmd: ControlCommand::ZERO,
            on_track: true,
            next_gate: 0,
            reset,
        }
    }

    /// Well-formedness scanner for the generated SVG subset: balanced
    /// tags, quoted attributes, one root element.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text.trim();
        let mut roots = 0;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').map(|e| start + e).expect("tag closed");
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("unbalanced </{name}>"));
                assert_eq!(open, name, "mismatched closing tag");
                if stack.is_empty() {
                    roots += 1;
                }
                continue;
            }
            let self_closing = tag.ends_with('/');
            let body = tag.trim_end_matches('/');
            let name = body.split_whitespace().next().expect("tag name");
            // Attribute values must be double-quoted: an even quote count
            // and no stray '=' outside quotes.
            let quotes = body.matches('"').count();
            assert_eq!(quotes % 2, 0, "unbalanced quotes in <{name}>");
            if !self_closing {
                stack.push(name.to_string());
            } else if stack.is_empty() {
                roots += 1;
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert_eq!(roots, 1, "expected exactly one root element");
    }

    #[test]
    fn empty_log_renders_track_only_valid_svg() {
        let track = test_track();
        let svg = render_trajectory(&track, &[], &RenderSpec::default());
        assert!(svg.contains("viewBox"));
        assert!(svg.contains("#dd2222"), "gates drawn in red");
        assert_well_formed_xml(&svg);
    }

    #[test]
    fn constant_speed_log_is_single_color() {
        let track = test_track();
        let rows: Vec<LogRow> = (0..10).map(|i| row(i as f64, 12.0, false)).collect();
        let svg = render_trajectory(&track, &rows, &RenderSpec::default());
        assert_well_formed_xml(&svg);
        let colors: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains("stroke=\"#") && !l.contains("#b0b0b0") && !l.contains("#dd2222"))
            .map(|l| {
                let i = l.find("stroke=\"").unwrap() + 8;
                &l[i..i + 7]
            })
            .collect();
        assert!(!colors.is_empty());
        assert!(colors.iter().all(|c| *c == colors[0]), "{colors:?}");
    }

    #[test]
    fn accelerating_log_colors_are_ordered_by_speed() {
        let track = test_track();
        let rows: Vec<LogRow> = (0..20).map(|i| row(i as f64, i as f64, false)).collect();
        let svg = render_trajectory(&track, &rows, &RenderSpec::default());
        let reds: Vec<u8> = svg
            .lines()
            .filter(|l| l.contains("stroke=\"#") && !l.contains("#b0b0b0") && !l.contains("#dd2222"))
            .map(|l| {
                let i = l.find("stroke=\"#").unwrap() + 9;
                u8::from_str_radix(&l[i..i + 2], 16).unwrap()
            })
            .collect();
        assert_eq!(reds.len(), 19);
        for w in reds.windows(2) {
            assert!(w[1] > w[0], "red channel must rise with speed: {reds:?}");
        }
    }

    #[test]
    fn reset_rows_become_dashed_gaps() {
        let track = test_track();
        let mut rows: Vec<LogRow> = (0..6).map(|i| row(i as f64, 5.0, false)).collect();
        rows[3].reset = true;
        let svg = render_trajectory(&track, &rows, &RenderSpec::default());
        assert!(svg.contains("stroke-dasharray"));
        assert_well_formed_xml(&svg);
    }

    fn fixture_result(track: &str, passed: usize, total: usize, time: f64, resets: usize) -> EpisodeResult {
        EpisodeResult {
            policy: "PID1".into(),
            track: track.into(),
            gates_passed: passed,
            gates_total: total,
            time_s: time,
            resets,
            aborted: false,
            log: Vec::new(),
        }
    }

    #[test]
    fn fixture_table_reproduces_published_averages() {
        // Conservative-controller column transcribed from the reference
        // ablation table; the Avg. row must come out 98.51% / 137.61 / 0.29.
        let cells = vec![vec![
            fixture_result("track1", 12, 12, 130.76, 0),
            fixture_result("track2", 20, 20, 136.19, 0),
            fixture_result("track3", 22, 22, 121.54, 0),
            fixture_result("track4", 18, 18, 139.09, 0),
            fixture_result("track5", 30, 30, 144.49, 0),
            fixture_result("track6", 20, 20, 151.95, 0),
            fixture_result("track7", 10, 12, 139.28, 2),
        ]];
        let suite = SuiteResult {
            policy_names: vec!["PID1".into()],
            track_names: (1..=7).map(|i| format!("track{i}")).collect(),
            cells,
        };
        let table = render_table(&suite);
        let avg_line = table.lines().last().unwrap();
        assert_eq!(avg_line, "| Avg. | 98.51% | 137.61 | 0.29 |");
        assert!(table.contains("| track7 | 10/12 | 139.28 | 2 |"));
    }

    #[test]
    fn table_round_trips_through_a_parser() {
        let cells = vec![vec![
            fixture_result("a", 7, 8, 61.5, 1),
            fixture_result("b", 8, 8, 55.25, 0),
        ]];
        let suite = SuiteResult {
            policy_names: vec!["PID1".into()],
            track_names: vec!["a".into(), "b".into()],
            cells: cells.clone(),
        };
        let table = render_table(&suite);
        // Parse back the per-track rows.
        let mut parsed = Vec::new();
        for line in table.lines().skip(2) {
            let fields: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
            if fields[0] == "Avg." {
                continue;
            }
            let (p, t) = fields[1].split_once('/').unwrap();
            parsed.push((
                fields[0].to_string(),
                p.parse::<usize>().unwrap(),
                t.parse::<usize>().unwrap(),
                fields[2].parse::<f64>().unwrap(),
                fields[3].parse::<usize>().unwrap(),
            ));
        }
        for (row, cell) in parsed.iter().zip(&cells[0]) {
            assert_eq!(row.0, cell.track);
            assert_eq!(row.1, cell.gates_passed);
            assert_eq!(row.2, cell.gates_total);
            assert!((row.3 - cell.time_s).abs() < 5e-3);
            assert_eq!(row.4, cell.resets);
        }
    }

    #[test]
    fn one_by_one_matrix_renders_two_data_rows() {
        let suite = SuiteResult {
            policy_names: vec!["hover".into()],
            track_names: vec!["t".into()],
            cells: vec![vec![fixture_result("t", 0, 16, 160.0, 16)]],
        };
        let table = render_table(&suite);
        assert_eq!(table.lines().count(), 4); // header, divider, track, Avg.
    }
}
