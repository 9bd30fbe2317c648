use std::fs;
use std::path::Path;

use proptest::prelude::*;
use serde_json::{json, Value};

use navsim::harness::{
    compute_ate, load_scenario, render_svg, run_scenario, write_outputs, HarnessError, RunRecord, Scenario, CSV_HEADER,
    METRICS_JSON, RENDER_SVG, RUN_CSV, SCENARIO_ECHO,
};
use navsim::navigation::BlockedZone;
use navsim::odometry::WheelGeometry;
use navsim::sim::NoiseModel;
use navsim::Pose2D;

fn straight_line(steps: usize) -> Value {
    json!({
        "schema_version": 1,
        "map": {"builtin": "open_room"},
        "seed": 1,
        "step_limit": steps,
        "start": [2.0, 5.0, 0.0],
        "noise": NoiseModel::noiseless(),
        "mcl": {"enabled": false},
        "fusion": {"enabled": false},
        "maneuvers": vec![json!({"v": 0.5, "omega": 0.0, "dt": 0.2}); 10]
    })
}

fn prepare(v: Value) -> Result<navsim::harness::PreparedScenario, HarnessError> {
    serde_json::from_value::<Scenario>(v).unwrap().prepare(Path::new("."))
}

#[test]
fn zero_step_limit_gives_an_empty_record() {
    let out = run_scenario(&prepare(straight_line(0)).unwrap()).unwrap();
    assert!(out.record.is_empty());
    assert!(!out.metrics.goal_reached);
    assert_eq!(out.metrics.steps, 0);
}

#[test]
fn noiseless_straight_line_odometry_is_within_tick_quantization() {
    let out = run_scenario(&prepare(straight_line(10)).unwrap()).unwrap();
    assert_eq!(out.record.len(), 10);
    let last = out.record.truth().last().copied().unwrap();
    assert!((last.x - 3.0).abs() < 1e-9 && (last.y - 5.0).abs() < 1e-12);
    let tick = WheelGeometry::default().distance_per_tick();
    // each step reads at most one tick short or long per wheel
    let ate = compute_ate(&out.record.truth(), &out.record.odometry()).unwrap();
    assert!(ate <= 10.0 * tick, "ate {ate}, tick {tick}");
    assert!((out.metrics.estimators["odometry"].ate_rmse - ate).abs() < 1e-15);
}

proptest! {
    #[test]
    fn ate_matches_a_direct_rms(
        truth in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -3.0f64..3.0), 10),
        noise in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10),
    ) {
        let t: Vec<_> = truth.iter().map(|&(x, y, th)| Pose2D::new(x, y, th)).collect();
        let e: Vec<_> = t.iter().zip(&noise).map(|(p, (dx, dy))| Pose2D::new(p.x + dx, p.y + dy, p.theta)).collect();
        let mut sum = 0.0;
        for (dx, dy) in &noise {
            sum += dx * dx + dy * dy;
        }
        let want = (sum / 10.0).sqrt();
        prop_assert!((compute_ate(&t, &e).unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn ate_of_a_constant_offset() {
    let t: Vec<_> = (0..7).map(|i| Pose2D::new(i as f64 * 0.3, -1.0, 0.2)).collect();
    let e: Vec<_> = t.iter().map(|p| Pose2D::new(p.x + 0.3, p.y + 0.4, p.theta)).collect();
    assert!((compute_ate(&t, &e).unwrap() - 0.5).abs() < 1e-12);
}

fn count<'a>(doc: &'a roxmltree::Document, tag: &str, class: Option<&str>) -> Vec<roxmltree::Node<'a, 'a>> {
    doc.descendants().filter(|n| n.has_tag_name(tag) && class.is_none_or(|c| n.attribute("class") == Some(c))).collect()
}

#[test]
fn svg_is_well_formed_with_one_vertex_per_step() {
    let prepared = prepare(straight_line(2)).unwrap();
    let out = run_scenario(&prepared).unwrap();
    let zone = BlockedZone { center: [5.0, 5.0], radius: 0.5 };
    let svg = render_svg(&prepared.map, &out.record, &[zone], &[[6.0, 5.0]]);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let lines = count(&doc, "polyline", None);
    assert!(!lines.is_empty());
    for l in lines {
        assert_eq!(l.attribute("points").unwrap().split_whitespace().count(), 2);
    }
    assert_eq!(count(&doc, "circle", Some("red")).len(), 1);
    assert_eq!(count(&doc, "circle", Some("waypoint")).len(), 1);

    let bare = render_svg(&prepared.map, &out.record, &[], &[]);
    let doc = roxmltree::Document::parse(&bare).unwrap();
    assert!(count(&doc, "circle", Some("red")).is_empty());
}

#[test]
fn validation_reports_every_problem() {
    let mut v = straight_line(5);
    v["schema_version"] = json!(7);
    v["dt"] = json!(-1.0);
    v["start"] = json!([-50.0, 0.0, 0.0]);
    v["goal"] = json!([1.0, 1.0]);
    v["scan"] = json!({"beam_count": 0});
    let Err(HarnessError::Invalid(errors)) = prepare(v) else { panic!("expected a validation error") };
    let text = errors.0.join("\n");
    for needle in ["schema_version", "dt must", "start lies outside", "scan.beam_count", "exactly one of"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
    assert!(errors.0.len() >= 5);
}

#[test]
fn csv_has_the_header_and_a_fixed_column_count() {
    let out = run_scenario(&prepare(straight_line(10)).unwrap()).unwrap();
    let csv = out.record.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let columns = CSV_HEADER.split(',').count();
    assert_eq!(columns, 19);
    for line in lines {
        assert_eq!(line.split(',').count(), columns, "{line}");
    }
    assert_eq!(RunRecord::from_csv(&csv).unwrap(), out.record);
}

#[test]
fn outputs_round_trip_through_the_scenario_echo() {
    let dir = tempfile::tempdir().unwrap();
    let maneuvers = dir.path().join("moves.json");
    fs::write(
        &maneuvers,
        json!([{"v": 0.3, "omega": 0.1, "dt": 0.5}, {"v": 0.3, "omega": -0.1, "dt": 0.5}]).to_string(),
    )
    .unwrap();
    let mut v = straight_line(2);
    v["maneuvers"] = json!("moves.json");
    let scenario_path = dir.path().join("s.json");
    fs::write(&scenario_path, v.to_string()).unwrap();

    let prepared = load_scenario(&scenario_path).unwrap();
    let out = run_scenario(&prepared).unwrap();
    let run = dir.path().join("run");
    write_outputs(&run, &prepared, &out).unwrap();
    for f in [RUN_CSV, METRICS_JSON, RENDER_SVG, SCENARIO_ECHO] {
        assert!(run.join(f).is_file(), "{f}");
    }
    // the echo is self-contained: defaults filled in, maneuvers inlined
    let echo: Value = serde_json::from_str(&fs::read_to_string(run.join(SCENARIO_ECHO)).unwrap()).unwrap();
    assert_eq!(echo["maneuvers"].as_array().unwrap().len(), 2);
    assert!(echo["navigation"]["config"]["robot_radius"].is_number());
    assert!(echo["scan"]["beam_count"].is_number());

    let again = run_scenario(&load_scenario(&run.join(SCENARIO_ECHO)).unwrap()).unwrap();
    assert_eq!(again.record.to_csv(), out.record.to_csv());
}
