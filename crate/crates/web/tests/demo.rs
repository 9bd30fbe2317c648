use navsim::worlds::four_room_floorplan;
use navsim::CellState;
use navsim_web::Demo;

fn pairs(flat: &[f64]) -> Vec<(f64, f64)> {
    flat.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

#[test]
fn cells_match_the_floorplan() {
    let demo = Demo::new(1).unwrap();
    let map = four_room_floorplan();
    assert_eq!((demo.width(), demo.height()), (map.width(), map.height()));
    let cells = demo.cells();
    for (i, s) in map.cells().iter().enumerate() {
        assert_eq!(cells[i] == 1, *s == CellState::Occupied);
    }
}

#[test]
fn scan_points_lie_on_structure() {
    let mut demo = Demo::new(1).unwrap();
    let map = four_room_floorplan();
    let field = navsim::mcl::precompute_distance_field(&map, 1.0);
    let points = pairs(&demo.scan().unwrap());
    assert!(points.len() > 300);
    let near = points.iter().filter(|(x, y)| field.distance_at(&nalgebra::Point2::new(*x, *y)) <= 0.1).count();
    assert!(near as f64 >= 0.95 * points.len() as f64, "{near} of {}", points.len());
}

#[test]
fn driving_localizes_the_robot() {
    let mut demo = Demo::new(3).unwrap();
    let mut est = Vec::new();
    // spin in place, then along the room
    for k in 0..60 {
        let (v, w) = if k < 30 { (0.0, 0.6) } else { (0.2, 0.0) };
        est = demo.drive(v, w, 0.5).unwrap();
    }
    let t = demo.truth();
    let err = (est[0] - t[0]).hypot(est[1] - t[1]);
    assert!(err < 0.2, "error {err}");
    assert_eq!(demo.particles().len() % 3, 0);
}

#[test]
fn plans_route_around_dropped_obstacles() {
    let mut demo = Demo::new(1).unwrap();
    let (sx, sy, gx, gy) = (1.0, 4.9, 9.0, 4.9);
    let clear = pairs(&demo.plan(sx, sy, gx, gy).unwrap());
    assert!(!clear.is_empty());
    demo.add_obstacle(5.0, 4.9, 0.3);
    let around = pairs(&demo.plan(sx, sy, gx, gy).unwrap());
    assert!(!around.is_empty());
    for (x, y) in &around {
        assert!((x - 5.0).hypot(y - 4.9) >= 0.3 + 0.2 - 0.05, "({x}, {y})");
    }
    // a wall of obstacles across the corridor
    for y in [4.3, 4.9, 5.5] {
        demo.add_obstacle(6.0, y, 0.3);
    }
    assert!(demo.plan(sx, sy, gx, gy).unwrap().is_empty());
    demo.clear_obstacles();
    assert_eq!(pairs(&demo.plan(sx, sy, gx, gy).unwrap()), clear);
}

#[test]
fn robot_stops_at_walls() {
    let mut demo = Demo::new(1).unwrap();
    assert!(demo.teleport(3.3, 2.0, 0.0));
    for _ in 0..20 {
        demo.drive(0.4, 0.0, 0.5).unwrap();
    }
    // the partition at x = 3.75 stops a 0.2 m radius robot short of it
    assert!(demo.truth()[0] < 3.75 - 0.15);
    assert!(!demo.teleport(4.0, 4.0, 0.0));
}
