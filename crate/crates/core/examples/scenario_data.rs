//! Writes the data files used by the sample scenarios: the four-room map as
//! a PGM image with its sidecar, and a patrol control script that drives
//! noise-free through every room.
//!
//! cargo run --example scenario_data -- scenarios/data

use std::collections::HashSet;
use std::path::PathBuf;

use nalgebra::Point2;

use navsim::map::save_map;
use navsim::navigation::{plan_path, PursuitController};
use navsim::sim::{step_truth, ControlInput};
use navsim::worlds::four_room_floorplan;
use navsim::Pose2D;

const STEPS: usize = 120;
const DT: f64 = 0.5;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios/data".into()));
    std::fs::create_dir_all(&dir)?;
    let map = four_room_floorplan();
    save_map(&map, &dir.join("four_room.pgm"), &dir.join("four_room.json"))?;

    let goals = [Point2::new(1.4, 4.9), Point2::new(7.0, 4.9), Point2::new(7.0, 2.8), Point2::new(8.6, 6.9)];
    let controller = PursuitController::default();
    let mut truth = Pose2D::new(2.0, 2.6, 0.3);
    let mut next_goal = 0;
    let mut path: Vec<Point2<f64>> = Vec::new();
    let mut script = Vec::with_capacity(STEPS);
    while script.len() < STEPS {
        if path.is_empty() {
            let goal = goals[next_goal % goals.len()];
            let p = plan_path(&map, &HashSet::new(), truth.position(), goal, 0.3)?
                .ok_or_else(|| anyhow::anyhow!("no path to {goal}"))?;
            path = p.points(&map).into_iter().step_by(6).skip(1).collect();
            path.push(goal);
            next_goal += 1;
        }
        while path.first().is_some_and(|p| (p - truth.position()).norm() < 0.25) {
            path.remove(0);
        }
        let Some(target) = path.first().copied() else { continue };
        let (v, w) = controller.command(&truth, target);
        let u = ControlInput::new(v, w, DT);
        truth = step_truth(&truth, &u);
        script.push(u);
    }
    std::fs::write(dir.join("patrol_moves.json"), serde_json::to_string_pretty(&script)? + "\n")?;
    println!("wrote {}", dir.display());
    Ok(())
}
