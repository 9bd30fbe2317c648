//! The simulation loop: control, truth, sensors, localizers, fusion and
//! navigation, one step at a time.

use std::collections::BTreeMap;

use super::metrics::{EstimatorMetrics, MetricsReport};
use super::record::{RunRecord, StepRow};
use super::scenario::{Drive, MclInit, MeasurementSource, PoseSource, PreparedScenario};
use super::HarnessError;
use crate::fusion::{self, FusedState};
use crate::geometry::Pose2D;
use crate::map::{CellState, OccupancyGrid};
use crate::mcl::{precompute_distance_field, MonteCarloLocalizer};
use crate::navigation::{NavMode, Navigator, Waypoint};
use crate::ndt::{build_ndt, map_points, ndt_align, NdtCellGrid};
use crate::odometry::{integrate_pose, wheel_delta};
use crate::rng::{stream_rng, Stream};
use crate::sim::{step_truth, synth_encoders, synth_scan, ControlInput};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub metrics: MetricsReport,
}

fn runtime(step: usize, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime { step, message: e.to_string() }
}

/// Static map plus the obstacles active at `step`.
fn world_at(map: &OccupancyGrid, prepared: &PreparedScenario, step: usize) -> OccupancyGrid {
    let mut world = map.clone();
    for o in prepared.scenario.obstacles.iter().filter(|o| o.active_at(step)) {
        o.shape.stamp(&mut world, CellState::Occupied);
    }
    world
}

fn footprint_collides(world: &OccupancyGrid, pose: &Pose2D, radius: f64) -> bool {
    world.cells_in_disc(pose.position(), radius).into_iter().any(|c| world.get(c) == CellState::Occupied)
}

fn select(
    source: PoseSource,
    truth: &Pose2D,
    odometry: &Pose2D,
    mcl: Option<Pose2D>,
    ndt: Option<Pose2D>,
    fused: Option<FusedState>,
) -> Pose2D {
    match source {
        PoseSource::Truth => Some(*truth),
        PoseSource::Odometry => Some(*odometry),
        PoseSource::Mcl => mcl,
        PoseSource::Ndt => ndt,
        PoseSource::Fused => fused.map(|f| f.pose()),
    }
    .unwrap_or(*odometry)
}

/// Runs a prepared scenario to completion.
pub fn run_scenario(prepared: &PreparedScenario) -> Result<RunOutput, HarnessError> {
    let sc = &prepared.scenario;
    let map = &prepared.map;
    let seed = sc.seed;
    let nav_cfg = sc.navigation.config;

    let mut encoder_rng = stream_rng(seed, Stream::Encoders, 0);
    let mut lidar_rng = stream_rng(seed, Stream::Lidar, 0);

    let mut mcl = if sc.mcl.enabled {
        let mut m = MonteCarloLocalizer::new(map, sc.mcl.params, seed).map_err(|e| runtime(0, e))?;
        if let MclInit::Known { position_std, heading_std } = sc.mcl.init {
            m.reinitialize_around(&sc.start, position_std, heading_std).map_err(|e| runtime(0, e))?;
        }
        Some(m)
    } else {
        None
    };
    let ndt_grid: Option<NdtCellGrid> = if sc.ndt.enabled {
        Some(build_ndt(&map_points(map), &sc.ndt.params).map_err(|e| runtime(0, e))?)
    } else {
        None
    };
    let model = sc.fusion.measurement_model();
    let process = sc.fusion.process_noise();
    let mut fused = sc.fusion.enabled.then(|| FusedState::new(&sc.start, sc.fusion.initial_covariance()));

    let mut navigator = match &prepared.drive {
        Drive::Autonomous { goal } => Some(Navigator::new(map, &sc.start, *goal, nav_cfg).map_err(|e| runtime(0, e))?),
        Drive::Scripted(_) => None,
    };
    let nav_field = navigator.as_ref().map(|_| precompute_distance_field(map, nav_cfg.map_match_tolerance + 1.0));
    let mut target: Option<Waypoint> = navigator.as_ref().and_then(|n| n.state.active_route.current().copied());

    let steps = match &prepared.drive {
        Drive::Scripted(list) => sc.step_limit.min(list.len()),
        Drive::Autonomous { .. } => sc.step_limit,
    };

    let mut truth = sc.start;
    let mut odometry = sc.start;
    let mut mcl_pose = mcl.as_ref().map(|m| m.estimate());
    let mut ndt_pose = ndt_grid.as_ref().map(|_| sc.start);
    let mut time = 0.0;
    let mut rows = Vec::with_capacity(steps);
    let mut collisions = 0;
    let mut ndt_failures = 0;
    let mut gated = 0;
    let mut world = world_at(map, prepared, 0);
    let mut active: Vec<bool> = sc.obstacles.iter().map(|o| o.active_at(0)).collect();

    for step in 1..=steps {
        let control_pose = select(sc.navigation.pose_source, &truth, &odometry, mcl_pose, ndt_pose, fused);
        let u = match &prepared.drive {
            Drive::Scripted(list) => list[step - 1],
            Drive::Autonomous { .. } => {
                let moving =
                    navigator.as_ref().is_some_and(|n| matches!(n.mode(), NavMode::Following | NavMode::Rerouting));
                match target.filter(|_| moving) {
                    Some(t) => {
                        let (v, w) = sc.navigation.controller.command(&control_pose, t.position);
                        ControlInput::new(v, w, sc.dt)
                    }
                    None => ControlInput::new(0.0, 0.0, sc.dt),
                }
            }
        };

        let next = step_truth(&truth, &u);
        let reading = synth_encoders(&truth, &next, &sc.wheel, &sc.noise, &mut encoder_rng);
        let delta = wheel_delta(&sc.wheel, &reading);
        truth = next;
        time += u.duration;
        odometry = integrate_pose(&odometry, &delta);

        let now: Vec<bool> = sc.obstacles.iter().map(|o| o.active_at(step)).collect();
        if now != active {
            world = world_at(map, prepared, step);
            active = now;
        }
        let scan = synth_scan(&truth, &world, &sc.scan, &sc.noise, &mut lidar_rng).map_err(|e| runtime(step, e))?;

        let mut mcl_usable = false;
        if let Some(m) = mcl.as_mut() {
            let out = m.update(&delta, &scan).map_err(|e| runtime(step, e))?;
            mcl_pose = Some(out.estimate);
            mcl_usable = !out.lost && !out.reinitialized;
        }

        let mut ndt_fresh = false;
        if let (Some(grid), Some(pose)) = (ndt_grid.as_ref(), ndt_pose.as_mut()) {
            *pose = integrate_pose(pose, &delta);
            if step % sc.ndt.every == 0 {
                let points = scan.points();
                if points.is_empty() {
                    ndt_failures += 1;
                } else {
                    let p = &sc.ndt.params;
                    let r =
                        ndt_align(grid, &points, pose, p.max_iterations, p.tolerance).map_err(|e| runtime(step, e))?;
                    if r.converged {
                        *pose = r.transform;
                        ndt_fresh = true;
                    } else {
                        ndt_failures += 1;
                    }
                }
            }
        }

        if let Some(state) = fused.as_mut() {
            let predicted = fusion::predict(state, &delta, &process);
            let measurement = match sc.fusion.source {
                MeasurementSource::Mcl => mcl_pose.filter(|_| mcl_usable),
                MeasurementSource::Ndt => ndt_pose.filter(|_| ndt_fresh),
            }
            .filter(|_| step % sc.fusion.every == 0);
            *state = match measurement {
                Some(y) => {
                    let accept = match sc.fusion.gate {
                        Some(gate) => {
                            fusion::mahalanobis_squared(&predicted, &y, &model).map_err(|e| runtime(step, e))? <= gate
                        }
                        None => true,
                    };
                    if accept {
                        fusion::update(&predicted, &y, &model).map_err(|e| runtime(step, e))?
                    } else {
                        gated += 1;
                        predicted
                    }
                }
                None => predicted,
            };
        }

        let mut nav_mode = None;
        if let (Some(nav), Some(field)) = (navigator.as_mut(), nav_field.as_ref()) {
            let pose = select(sc.navigation.pose_source, &truth, &odometry, mcl_pose, ndt_pose, fused);
            let update = nav.on_scan(map, field, &scan, &pose).map_err(|e| runtime(step, e))?;
            target = update.target;
            nav_mode = Some(update.mode);
        }

        if footprint_collides(&world, &truth, nav_cfg.robot_radius) {
            collisions += 1;
        }
        rows.push(StepRow {
            step,
            time_s: time,
            truth,
            odometry,
            mcl: mcl_pose,
            ndt: ndt_pose,
            fused: fused.map(|f| f.pose()),
            nav_mode,
            cov_trace: fused.map(|f| f.trace()),
        });
        if nav_mode == Some(NavMode::Arrived) {
            break;
        }
    }

    let record = RunRecord { rows };
    let goal_reached = match (&prepared.drive, navigator.as_ref(), record.rows.last()) {
        (Drive::Autonomous { goal }, Some(nav), Some(last)) => {
            nav.mode() == NavMode::Arrived
                && (last.truth.position() - goal).norm() <= nav_cfg.arrival_tolerance + sc.localized_threshold
        }
        _ => false,
    };
    let mut estimators = BTreeMap::new();
    if !record.is_empty() {
        let truth = record.truth();
        for (name, poses) in record.estimators() {
            let m = EstimatorMetrics::compute(&truth, &poses, sc.localized_threshold).map_err(|e| runtime(steps, e))?;
            estimators.insert(name.to_string(), m);
        }
    }
    let metrics = MetricsReport {
        steps: record.len(),
        goal_reached,
        halts: navigator.as_ref().map_or(0, |n| n.halts()),
        collisions,
        final_nav_mode: navigator.as_ref().map(|n| n.mode()),
        ndt_failures,
        gated_measurements: gated,
        estimators,
        blocked_zones: navigator.as_ref().map(|n| n.state.blocked_zones.clone()).unwrap_or_default(),
        waypoints: navigator
            .as_ref()
            .map(|n| n.state.active_route.remaining().iter().map(|w| [w.position.x, w.position.y]).collect())
            .unwrap_or_default(),
    };
    Ok(RunOutput { record, metrics })
}
