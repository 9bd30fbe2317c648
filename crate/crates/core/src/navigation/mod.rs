//! Waypoint navigation with cylindrical obstacle-detection zones.
//!
//! Each route waypoint carries a detection zone; in the plane the vertical
//! cylinder reduces to a disc. Any non-ground return inside a zone blocks the
//! waypoint. Blocked zones and detected obstacle points are stamped into the
//! planning grid and A* is re-run, so the detour side falls out of the path
//! cost. When no path exists the robot halts until one reappears.

mod planner;

pub use planner::{astar, octile, path_cost, plan_on_grid, plan_path, GridPath, PlanError, PlanningGrid};

use std::collections::{HashSet, VecDeque};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff, Pose2D};
use crate::map::{CellIndex, OccupancyGrid};
use crate::mcl::DistanceField;
use crate::scan::LidarScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WaypointStatus {
    Free,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point2<f64>,
    pub zone_radius: f64,
    pub status: WaypointStatus,
}

impl Waypoint {
    pub fn new(position: Point2<f64>, zone_radius: f64) -> Self {
        Self { position, zone_radius, status: WaypointStatus::Free }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Route {
    pub waypoints: Vec<Waypoint>,
    pub current_index: usize,
}

impl Route {
    /// Route along `points` (typically cell centers of a grid path), keeping
    /// consecutive waypoints at most `max_spacing` apart. The first point is
    /// taken to be the robot's own position and is not a waypoint.
    pub fn from_path_points(points: &[Point2<f64>], zone_radius: f64, max_spacing: f64) -> Self {
        let mut waypoints = Vec::new();
        if let Some(first) = points.first() {
            let mut last = *first;
            for (i, p) in points.iter().enumerate().skip(1) {
                let is_final = i + 1 == points.len();
                let next_too_far = points.get(i + 1).is_some_and(|n| (n - last).norm() > max_spacing);
                if is_final || next_too_far {
                    waypoints.push(Waypoint::new(*p, zone_radius));
                    last = *p;
                }
            }
        }
        Self { waypoints, current_index: 0 }
    }

    pub fn current(&self) -> Option<&Waypoint> {
        self.waypoints.get(self.current_index)
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Waypoints not yet reached.
    pub fn remaining(&self) -> &[Waypoint] {
        &self.waypoints[self.current_index.min(self.waypoints.len())..]
    }

    pub fn any_remaining_blocked(&self) -> bool {
        self.remaining().iter().any(|w| w.status == WaypointStatus::Blocked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HeightClass {
    Ground,
    NonGround,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePoint {
    pub position: Point2<f64>,
    pub height_class: HeightClass,
}

/// Ground segmentation settings. Only used when per-beam heights are
/// supplied; planar scans carry no height and every return is non-ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundFilter {
    pub ground_height_tolerance: f64,
}

impl Default for GroundFilter {
    fn default() -> Self {
        Self { ground_height_tolerance: 0.05 }
    }
}

/// Projects scan returns into the world from `robot_pose` and labels them.
pub fn classify_obstacles(
    scan: &LidarScan,
    robot_pose: &Pose2D,
    heights: Option<&[f64]>,
    filter: &GroundFilter,
) -> Vec<ObstaclePoint> {
    scan.returns()
        .map(|(i, r)| {
            let (s, c) = scan.beam_angle(i).sin_cos();
            let position = robot_pose.transform_point(&Point2::new(r * c, r * s));
            let height_class = match heights.and_then(|h| h.get(i)) {
                Some(h) if h.abs() <= filter.ground_height_tolerance => HeightClass::Ground,
                _ => HeightClass::NonGround,
            };
            ObstaclePoint { position, height_class }
        })
        .collect()
}

/// Drops returns that coincide with structure already on the map, leaving
/// only obstacles the layout map does not know about.
pub fn unmapped_obstacles(obstacles: &[ObstaclePoint], field: &DistanceField, tolerance: f64) -> Vec<ObstaclePoint> {
    obstacles.iter().filter(|o| field.distance_at(&o.position) > tolerance).copied().collect()
}

/// Recomputes every waypoint status: BLOCKED iff a non-ground obstacle lies
/// strictly inside its zone.
pub fn check_zones(route: &Route, obstacles: &[ObstaclePoint]) -> Route {
    let mut out = route.clone();
    for w in &mut out.waypoints {
        let hit = obstacles
            .iter()
            .any(|o| o.height_class == HeightClass::NonGround && (o.position - w.position).norm() < w.zone_radius);
        w.status = if hit { WaypointStatus::Blocked } else { WaypointStatus::Free };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NavMode {
    Following,
    Rerouting,
    Halted,
    Arrived,
}

impl NavMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NavMode::Following => "FOLLOWING",
            NavMode::Rerouting => "REROUTING",
            NavMode::Halted => "HALTED",
            NavMode::Arrived => "ARRIVED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [NavMode::Following, NavMode::Rerouting, NavMode::Halted, NavMode::Arrived]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

/// A disc excluded from planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockedZone {
    pub center: [f64; 2],
    pub radius: f64,
}

impl BlockedZone {
    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.center[0], self.center[1])
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        (p - self.center()).norm() < self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub mode: NavMode,
    pub active_route: Route,
    pub goal: Point2<f64>,
    /// Zones currently stamped into the planning grid.
    pub blocked_zones: Vec<BlockedZone>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub robot_radius: f64,
    /// Detection zone radius; defaults to robot radius plus 0.3 m.
    pub zone_radius: f64,
    pub inflation_radius: f64,
    pub arrival_tolerance: f64,
    pub waypoint_spacing: f64,
    /// Returns closer than this to mapped structure are not obstacles.
    pub map_match_tolerance: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        let robot_radius = 0.2;
        Self {
            robot_radius,
            zone_radius: robot_radius + 0.3,
            inflation_radius: robot_radius,
            arrival_tolerance: 0.2,
            waypoint_spacing: 0.5,
            map_match_tolerance: 0.15,
        }
    }
}

/// Cells excluded by blocked zones and by discs of `clearance` around
/// detected obstacle points.
pub fn blocked_cells(
    map: &OccupancyGrid,
    zones: &[BlockedZone],
    obstacles: &[ObstaclePoint],
    clearance: f64,
) -> HashSet<CellIndex> {
    let mut cells = HashSet::new();
    for z in zones {
        cells.extend(map.cells_in_disc(z.center(), z.radius));
    }
    for o in obstacles.iter().filter(|o| o.height_class == HeightClass::NonGround) {
        if let Some(c) = map.world_to_grid(&o.position) {
            cells.insert(c);
        }
        cells.extend(map.cells_in_disc(o.position, clearance));
    }
    cells
}

/// Planning grid used by [`reroute`], exposed so callers can cross-check a
/// halt against an independent search on the identical grid.
pub fn reroute_grid(
    map: &OccupancyGrid,
    zones: &[BlockedZone],
    obstacles: &[ObstaclePoint],
    robot: Point2<f64>,
    config: &NavConfig,
) -> PlanningGrid {
    // waypoints of the new route stay outside the zone of every seen
    // obstacle, so the route is not blocked again by the same points
    let clearance = config.inflation_radius.max(config.zone_radius + map.resolution());
    let blocked = blocked_cells(map, zones, obstacles, clearance);
    let mut grid = PlanningGrid::build(map, &blocked, config.inflation_radius);
    // the robot cannot be standing inside an obstacle it just detected
    if let Some(c) = map.world_to_grid(&robot) {
        if PlanningGrid::build(map, &HashSet::new(), config.inflation_radius).is_free(c) {
            grid.set_free(c, true);
        }
    }
    grid
}

/// Stamps the state's blocked zones and the current obstacles into the
/// planning grid and re-plans from the robot to the goal.
///
/// A path yields REROUTING while any zone or obstacle shapes the plan and
/// FOLLOWING otherwise; no path yields HALTED with the previous route kept.
pub fn reroute(
    nav: &NavState,
    map: &OccupancyGrid,
    obstacles: &[ObstaclePoint],
    robot_pose: &Pose2D,
    goal: Point2<f64>,
    config: &NavConfig,
) -> Result<NavState, PlanError> {
    let robot = robot_pose.position();
    let static_grid = PlanningGrid::build(map, &HashSet::new(), config.inflation_radius);
    // endpoint errors are judged on the static map only
    plan_on_grid(map, &static_grid, robot, robot)?;
    plan_on_grid(map, &static_grid, goal, goal).map_err(|e| match e {
        PlanError::StartOutOfBounds(x, y) => PlanError::GoalOutOfBounds(x, y),
        PlanError::StartBlocked(x, y) => PlanError::GoalBlocked(x, y),
        other => other,
    })?;

    let grid = reroute_grid(map, &nav.blocked_zones, obstacles, robot, config);
    let shaped = !nav.blocked_zones.is_empty() || obstacles.iter().any(|o| o.height_class == HeightClass::NonGround);
    let start = map.world_to_grid(&robot).expect("checked above");
    let goal_cell = map.world_to_grid(&goal).expect("checked above");

    let mut next = nav.clone();
    next.goal = goal;
    match astar(&grid, start, goal_cell) {
        Some(path) => {
            next.active_route = Route::from_path_points(&path.points(map), config.zone_radius, config.waypoint_spacing);
            next.mode = if next.active_route.is_empty() {
                NavMode::Arrived
            } else if shaped {
                NavMode::Rerouting
            } else {
                NavMode::Following
            };
        }
        None => next.mode = NavMode::Halted,
    }
    Ok(next)
}

/// Moves past every waypoint the robot is already within `tolerance` of.
pub fn advance(nav: &NavState, robot_pose: &Pose2D, tolerance: f64) -> (NavState, Option<Waypoint>) {
    let mut next = nav.clone();
    if matches!(next.mode, NavMode::Halted | NavMode::Arrived) {
        return (next.clone(), next.active_route.current().copied());
    }
    let robot = robot_pose.position();
    loop {
        let Some(w) = next.active_route.current() else {
            next.mode = NavMode::Arrived;
            break;
        };
        if (w.position - robot).norm() > tolerance {
            break;
        }
        if next.active_route.current_index + 1 == next.active_route.waypoints.len() {
            next.mode = NavMode::Arrived;
            break;
        }
        next.active_route.current_index += 1;
    }
    let target = next.active_route.current().copied();
    (next, target)
}

/// Proportional heading controller with saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitController {
    pub v_max: f64,
    pub omega_max: f64,
    pub heading_gain: f64,
    /// Heading error beyond which the robot turns in place.
    pub turn_in_place_above: f64,
}

impl Default for PursuitController {
    fn default() -> Self {
        Self { v_max: 0.4, omega_max: 1.5, heading_gain: 2.0, turn_in_place_above: 0.8 }
    }
}

impl PursuitController {
    /// (v, omega) steering `pose` toward `target`.
    pub fn command(&self, pose: &Pose2D, target: Point2<f64>) -> (f64, f64) {
        let to = target - pose.position();
        let error = angle_diff(to.y.atan2(to.x), pose.theta);
        let omega = (self.heading_gain * error).clamp(-self.omega_max, self.omega_max);
        let v = if error.abs() > self.turn_in_place_above { 0.0 } else { self.v_max * error.cos().max(0.0) };
        (v, omega)
    }
}

/// Per-robot navigation loop state: route following, zone checks on every
/// scan, blocked-zone memory and replanning.
#[derive(Debug, Clone)]
pub struct Navigator {
    pub config: NavConfig,
    pub ground_filter: GroundFilter,
    pub state: NavState,
    halts: usize,
}

/// What one scan did to the navigator.
#[derive(Debug, Clone, PartialEq)]
pub struct NavUpdate {
    pub mode: NavMode,
    pub target: Option<Waypoint>,
    pub replanned: bool,
    pub newly_halted: bool,
}

impl Navigator {
    /// Plans the initial route on the static map.
    pub fn new(map: &OccupancyGrid, start: &Pose2D, goal: Point2<f64>, config: NavConfig) -> Result<Self, PlanError> {
        let empty =
            NavState { mode: NavMode::Following, active_route: Route::default(), goal, blocked_zones: Vec::new() };
        let start = snap_to_free(map, start, &config);
        let state = reroute(&empty, map, &[], &start, goal, &config)?;
        let halts = usize::from(state.mode == NavMode::Halted);
        Ok(Self { config, ground_filter: GroundFilter::default(), state, halts })
    }

    pub fn halts(&self) -> usize {
        self.halts
    }

    pub fn mode(&self) -> NavMode {
        self.state.mode
    }

    /// Zone bookkeeping for one scan taken at (estimated) `pose`.
    pub fn on_scan(
        &mut self,
        map: &OccupancyGrid,
        field: &DistanceField,
        scan: &LidarScan,
        pose: &Pose2D,
    ) -> Result<NavUpdate, PlanError> {
        let seen = classify_obstacles(scan, pose, None, &self.ground_filter);
        let obstacles = unmapped_obstacles(&seen, field, self.config.map_match_tolerance);

        // a stored zone is dropped once a scan that covers it shows it empty
        let robot = pose.position();
        let before = self.state.blocked_zones.len();
        self.state.blocked_zones.retain(|z| {
            let in_view = (z.center() - robot).norm() + z.radius < scan.range_max;
            !in_view || obstacles.iter().any(|o| z.contains(&o.position))
        });
        let cleared = self.state.blocked_zones.len() != before;

        self.state.active_route = check_zones(&self.state.active_route, &obstacles);
        let newly_blocked: Vec<BlockedZone> = self
            .state
            .active_route
            .remaining()
            .iter()
            .filter(|w| w.status == WaypointStatus::Blocked)
            .map(|w| BlockedZone { center: [w.position.x, w.position.y], radius: w.zone_radius })
            .filter(|z| !self.state.blocked_zones.contains(z))
            .collect();
        let blocked_now = !newly_blocked.is_empty();
        self.state.blocked_zones.extend(newly_blocked);

        let was_halted = self.state.mode == NavMode::Halted;
        let mut replanned = false;
        if self.state.mode != NavMode::Arrived && (blocked_now || was_halted || cleared) {
            let start = snap_to_free(map, pose, &self.config);
            let goal = self.state.goal;
            self.state = reroute(&self.state, map, &obstacles, &start, goal, &self.config)?;
            replanned = true;
        }
        let newly_halted = !was_halted && self.state.mode == NavMode::Halted;
        if newly_halted {
            self.halts += 1;
        }
        let (state, target) = advance(&self.state, pose, self.config.arrival_tolerance);
        self.state = state;
        Ok(NavUpdate { mode: self.state.mode, target, replanned, newly_halted })
    }
}

/// The robot's pose, moved to the nearest cell that is traversable on the
/// static map when it has drifted into the inflation band.
fn snap_to_free(map: &OccupancyGrid, pose: &Pose2D, config: &NavConfig) -> Pose2D {
    let Some(start) = map.world_to_grid(&pose.position()) else {
        return *pose;
    };
    let grid = PlanningGrid::build(map, &HashSet::new(), config.inflation_radius);
    if grid.is_free(start) {
        return *pose;
    }
    let limit = ((config.inflation_radius + config.robot_radius) / map.resolution()).ceil() as usize + 1;
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if grid.is_free(c) {
            let p = map.grid_to_world(c);
            return Pose2D::new(p.x, p.y, pose.theta);
        }
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let nx = c.ix as i64 + dx;
            let ny = c.iy as i64 + dy;
            if nx < 0 || ny < 0 || nx >= map.width() as i64 || ny >= map.height() as i64 {
                continue;
            }
            let n = CellIndex::new(nx as usize, ny as usize);
            if n.ix.abs_diff(start.ix) + n.iy.abs_diff(start.iy) <= 2 * limit && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    *pose
}
