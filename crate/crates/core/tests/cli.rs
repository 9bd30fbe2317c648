use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

use navsim::map::save_map;
use navsim::worlds::{open_room, Shape};
use navsim::CellState;

fn navsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navsim")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scripted(steps: usize) -> Value {
    json!({
        "schema_version": 1,
        "map": {"builtin": "open_room"},
        "seed": 4,
        "step_limit": steps,
        "start": [2.0, 2.0, 0.0],
        "mcl": {"params": {"particles": 200}},
        "maneuvers": vec![json!({"v": 0.4, "omega": 0.2, "dt": 0.2}); steps]
    })
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

#[test]
fn simulate_writes_artifacts_and_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    write_json(&good, &scripted(5));
    let out = dir.path().join("run");
    let r = navsim(&["simulate", "--scenario", s(&good), "--out", s(&out), "--seed", "9"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["run.csv", "metrics.json", "render.svg", "scenario-echo.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let echo: Value = serde_json::from_str(&fs::read_to_string(out.join("scenario-echo.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 9);

    let mut bad = scripted(5);
    bad["dt"] = json!(0.0);
    bad["scan"] = json!({"range_max": -1.0});
    let bad_path = dir.path().join("bad.json");
    write_json(&bad_path, &bad);
    let r = navsim(&["simulate", "--scenario", s(&bad_path), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&r), 1);
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("dt must be positive") && err.contains("scan.range_max"), "{err}");

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&navsim(&["simulate", "--scenario", s(&garbage), "--out", s(&dir.path().join("y"))])), 1);

    // the output path is an existing file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(code(&navsim(&["simulate", "--scenario", s(&good), "--out", s(&blocker)])), 2);
}

#[test]
fn unreached_required_goal_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    write_json(
        &path,
        &json!({
            "schema_version": 1,
            "map": {"builtin": "open_room"},
            "step_limit": 3,
            "start": [1.0, 1.0, 0.0],
            "goal": [9.0, 9.0],
            "mcl": {"init": {"mode": "known", "position_std": 0.05, "heading_std": 0.02}, "params": {"particles": 200}},
            "require_goal": true
        }),
    );
    let out = dir.path().join("run");
    let r = navsim(&["simulate", "--scenario", s(&path), "--out", s(&out)]);
    assert_eq!(code(&r), 3);
    assert!(out.join("metrics.json").is_file());
}

#[test]
fn plan_prints_json_and_exits_two_without_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut map = open_room(5.0, 5.0, 0.1);
    // a closed ring around (4, 4)
    Shape::Rect { min: [3.2, 3.2], max: [4.8, 4.8] }.stamp(&mut map, CellState::Occupied);
    Shape::Rect { min: [3.5, 3.5], max: [4.5, 4.5] }.stamp(&mut map, CellState::Free);
    let (pgm, meta) = (dir.path().join("m.pgm"), dir.path().join("m.json"));
    save_map(&map, &pgm, &meta).unwrap();
    let base = ["plan", "--map", s(&pgm), "--meta", s(&meta), "--start", "1,1", "--inflation", "0.1"];

    let r = navsim(&[&base[..], &["--goal", "2.5,1.0"]].concat());
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let plan: Value = serde_json::from_slice(&r.stdout).unwrap();
    let waypoints = plan["waypoints"].as_array().unwrap();
    assert_eq!(waypoints.first().unwrap(), &json!([1.05, 1.05]));
    assert!((plan["length_m"].as_f64().unwrap() - 1.5).abs() < 1e-9);

    assert_eq!(code(&navsim(&[&base[..], &["--goal", "4.0,4.0"]].concat())), 2);
    // goal inside a wall and a malformed point are input errors
    assert_eq!(code(&navsim(&[&base[..], &["--goal", "0.02,0.02"]].concat())), 1);
    assert_eq!(code(&navsim(&[&base[..], &["--goal", "nope"]].concat())), 1);
    assert_eq!(code(&navsim(&["--help"])), 0);
}

#[test]
fn batch_runs_every_scenario_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios");
    fs::create_dir(&scenarios).unwrap();
    write_json(&scenarios.join("a.json"), &scripted(3));
    write_json(&scenarios.join("b.json"), &scripted(4));
    let mut bad = scripted(3);
    bad["schema_version"] = json!(0);
    write_json(&scenarios.join("c.json"), &bad);
    let out = dir.path().join("out");

    let r = navsim(&["batch", "--scenarios", s(&scenarios), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code(&r), 1);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let rows = summary.as_array().unwrap();
    let names: Vec<_> = rows.iter().map(|r| r["scenario"].as_str().unwrap()).collect();
    assert_eq!(names, ["a", "b", "c"]);
    assert_eq!(rows[0]["exit_code"], 0);
    assert_eq!(rows[2]["exit_code"], 1);
    assert!(out.join("a").join("run.csv").is_file() && out.join("b").join("run.csv").is_file());

    fs::remove_file(scenarios.join("c.json")).unwrap();
    let r = navsim(&["batch", "--scenarios", s(&scenarios), "--out", s(&out)]);
    assert_eq!(code(&r), 0);
}

#[test]
fn render_rebuilds_the_svg_of_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    write_json(&path, &scripted(4));
    let run = dir.path().join("run");
    assert_eq!(code(&navsim(&["simulate", "--scenario", s(&path), "--out", s(&run)])), 0);
    let original = fs::read_to_string(run.join("render.svg")).unwrap();
    fs::remove_file(run.join("render.svg")).unwrap();
    let r = navsim(&["render", "--run", s(&run)]);
    assert_eq!(code(&r), 0);
    assert_eq!(fs::read_to_string(run.join("render.svg")).unwrap(), original);
    assert_eq!(code(&navsim(&["render", "--run", s(&dir.path().join("missing"))])), 2);
}
