//! Browser bindings for the navsim demo page: a simulated LiDAR on the
//! four-room floorplan, a Monte Carlo localizer that follows a robot driven
//! from the keyboard, and obstacle-aware replanning around dropped discs.

use std::collections::HashSet;

use nalgebra::Point2;
use wasm_bindgen::prelude::*;

use navsim::mcl::{MclConfig, MonteCarloLocalizer};
use navsim::navigation::{blocked_cells, plan_path, BlockedZone, NavConfig};
use navsim::odometry::{wheel_delta, WheelGeometry};
use navsim::rng::{stream_rng, Stream, StreamRng};
use navsim::sim::{step_truth, synth_encoders, synth_scan, ControlInput, NoiseModel, ScanConfig};
use navsim::worlds::{four_room_floorplan, Shape};
use navsim::{CellState, OccupancyGrid, Pose2D};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    map: OccupancyGrid,
    world: OccupancyGrid,
    obstacles: Vec<BlockedZone>,
    truth: Pose2D,
    mcl: MonteCarloLocalizer,
    wheel: WheelGeometry,
    noise: NoiseModel,
    scan: ScanConfig,
    encoder_rng: StreamRng,
    lidar_rng: StreamRng,
}

#[wasm_bindgen]
impl Demo {
    /// A robot at (2.0, 2.6) and a globally initialized localizer.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Demo, JsValue> {
        let map = four_room_floorplan();
        let mcl = MonteCarloLocalizer::new(&map, MclConfig::default(), seed).map_err(js_err)?;
        Ok(Demo {
            world: map.clone(),
            map,
            obstacles: Vec::new(),
            truth: Pose2D::new(2.0, 2.6, 0.3),
            mcl,
            wheel: WheelGeometry::default(),
            noise: NoiseModel::default(),
            scan: ScanConfig::default(),
            encoder_rng: stream_rng(seed, Stream::Encoders, 0),
            lidar_rng: stream_rng(seed, Stream::Lidar, 0),
        })
    }

    pub fn width(&self) -> usize {
        self.map.width()
    }

    pub fn height(&self) -> usize {
        self.map.height()
    }

    pub fn resolution(&self) -> f64 {
        self.map.resolution()
    }

    /// Row-major cells of the simulated world, row 0 at the lowest y:
    /// 0 free, 1 occupied, 2 unknown.
    pub fn cells(&self) -> Vec<u8> {
        self.world
            .cells()
            .iter()
            .map(|c| match c {
                CellState::Free => 0,
                CellState::Occupied => 1,
                CellState::Unknown => 2,
            })
            .collect()
    }

    /// True pose as [x, y, theta].
    pub fn truth(&self) -> Vec<f64> {
        self.truth.to_vector().as_slice().to_vec()
    }

    /// Moves the robot to a free point; the localizer is not told.
    pub fn teleport(&mut self, x: f64, y: f64, theta: f64) -> bool {
        let p = Point2::new(x, y);
        let free = self.world.world_to_grid(&p).is_some_and(|c| self.world.get(c) == CellState::Free);
        if free {
            self.truth = Pose2D::new(x, y, theta);
        }
        free
    }

    /// Noisy scan from the true pose as flat [x0, y0, x1, y1, ...] world
    /// coordinates of the returns.
    pub fn scan(&mut self) -> Result<Vec<f64>, JsValue> {
        let scan =
            synth_scan(&self.truth, &self.world, &self.scan, &self.noise, &mut self.lidar_rng).map_err(js_err)?;
        Ok(scan.world_points(&self.truth).iter().flat_map(|p| [p.x, p.y]).collect())
    }

    /// Drives for `dt` seconds unless the footprint would hit the world,
    /// then runs one localizer cycle. Returns the estimate [x, y, theta].
    pub fn drive(&mut self, v: f64, omega: f64, dt: f64) -> Result<Vec<f64>, JsValue> {
        let mut next = step_truth(&self.truth, &ControlInput::new(v, omega, dt));
        let hit = self
            .world
            .cells_in_disc(next.position(), NavConfig::default().robot_radius)
            .into_iter()
            .any(|c| self.world.get(c) == CellState::Occupied);
        if hit {
            next = self.truth;
        }
        let reading = synth_encoders(&self.truth, &next, &self.wheel, &self.noise, &mut self.encoder_rng);
        self.truth = next;
        let scan =
            synth_scan(&self.truth, &self.world, &self.scan, &self.noise, &mut self.lidar_rng).map_err(js_err)?;
        let step = self.mcl.update(&wheel_delta(&self.wheel, &reading), &scan).map_err(js_err)?;
        Ok(step.estimate.to_vector().as_slice().to_vec())
    }

    /// Particle poses as flat [x, y, theta, ...].
    pub fn particles(&self) -> Vec<f64> {
        self.mcl.particles().particles.iter().flat_map(|p| [p.pose.x, p.pose.y, p.pose.theta]).collect()
    }

    pub fn relocalize(&mut self) -> Result<(), JsValue> {
        self.mcl.reinitialize_global().map_err(js_err)
    }

    /// Drops a disc obstacle that the localization map does not know about.
    pub fn add_obstacle(&mut self, x: f64, y: f64, radius: f64) {
        Shape::Disc { center: [x, y], radius }.stamp(&mut self.world, CellState::Occupied);
        self.obstacles.push(BlockedZone { center: [x, y], radius });
    }

    pub fn clear_obstacles(&mut self) {
        self.world = self.map.clone();
        self.obstacles.clear();
    }

    /// Plans on the static map with every obstacle, grown by the inflation
    /// radius, stamped as a blocked disc. Returns flat [x, y, ...]
    /// waypoints; empty when no path exists.
    pub fn plan(&self, sx: f64, sy: f64, gx: f64, gy: f64) -> Result<Vec<f64>, JsValue> {
        let config = NavConfig::default();
        let grown: Vec<_> =
            self.obstacles.iter().map(|z| BlockedZone { radius: z.radius + config.inflation_radius, ..*z }).collect();
        let blocked: HashSet<_> = blocked_cells(&self.map, &grown, &[], 0.0);
        let path = plan_path(&self.map, &blocked, Point2::new(sx, sy), Point2::new(gx, gy), config.inflation_radius)
            .map_err(js_err)?;
        Ok(path.map(|p| p.points(&self.map).iter().flat_map(|q| [q.x, q.y]).collect()).unwrap_or_default())
    }
}
