//! SVG rendering of a run over its map.

use std::fmt::Write as _;

use nalgebra::Point2;

use super::record::RunRecord;
use crate::map::{CellIndex, CellState, OccupancyGrid};
use crate::navigation::BlockedZone;

const PX_PER_M: f64 = 50.0;

const STYLE: &str = "\
.occupied{fill:#222}\
.unknown{fill:#bbb}\
polyline{fill:none;stroke-width:2}\
.truth{stroke:#000}\
.odometry{stroke:#888;stroke-dasharray:6 4}\
.mcl{stroke:#1f77b4}\
.ndt{stroke:#2ca02c;stroke-dasharray:2 3}\
.fused{stroke:#ff7f0e}\
.waypoint{fill:#9467bd}\
.red{fill:#d62728;fill-opacity:0.35;stroke:#d62728}";

struct Canvas {
    origin: Point2<f64>,
    height_m: f64,
}

impl Canvas {
    fn x(&self, x: f64) -> f64 {
        (x - self.origin.x) * PX_PER_M
    }

    fn y(&self, y: f64) -> f64 {
        (self.height_m - (y - self.origin.y)) * PX_PER_M
    }
}

/// Map cells, the true and estimated trajectories, remaining waypoints and
/// blocked zones (class `red`).
pub fn render_svg(
    map: &OccupancyGrid,
    run: &RunRecord,
    blocked_zones: &[BlockedZone],
    waypoints: &[[f64; 2]],
) -> String {
    let (w, h) = map.extent();
    let origin = map.origin();
    let canvas = Canvas { origin: Point2::new(origin.x, origin.y), height_m: h };
    let res = map.resolution();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w * PX_PER_M,
        h * PX_PER_M,
        w * PX_PER_M,
        h * PX_PER_M
    );
    let _ = writeln!(out, "<style>{STYLE}</style>");
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);

    // one rectangle per horizontal run of equal non-free cells
    out.push_str("<g>\n");
    for iy in 0..map.height() {
        let mut ix = 0;
        while ix < map.width() {
            let state = map.get(CellIndex::new(ix, iy));
            let start = ix;
            while ix < map.width() && map.get(CellIndex::new(ix, iy)) == state {
                ix += 1;
            }
            let class = match state {
                CellState::Free => continue,
                CellState::Occupied => "occupied",
                CellState::Unknown => "unknown",
            };
            let x0 = origin.x + start as f64 * res;
            let y1 = origin.y + (iy + 1) as f64 * res;
            let _ = writeln!(
                out,
                r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                canvas.x(x0),
                canvas.y(y1),
                (ix - start) as f64 * res * PX_PER_M,
                res * PX_PER_M
            );
        }
    }
    out.push_str("</g>\n");

    let mut trajectories = vec![("truth", run.truth())];
    trajectories.extend(run.estimators());
    for (name, poses) in trajectories {
        if poses.is_empty() {
            continue;
        }
        let points: Vec<String> = poses.iter().map(|p| format!("{:.2},{:.2}", canvas.x(p.x), canvas.y(p.y))).collect();
        let _ = writeln!(out, r#"<polyline class="{name}" points="{}"/>"#, points.join(" "));
    }
    for wp in waypoints {
        let _ = writeln!(
            out,
            r#"<circle class="waypoint" cx="{:.2}" cy="{:.2}" r="3"/>"#,
            canvas.x(wp[0]),
            canvas.y(wp[1])
        );
    }
    for z in blocked_zones {
        let _ = writeln!(
            out,
            r#"<circle class="red" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
            canvas.x(z.center[0]),
            canvas.y(z.center[1]),
            z.radius * PX_PER_M
        );
    }
    out.push_str("</svg>\n");
    out
}
