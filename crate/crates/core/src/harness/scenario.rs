//! Scenario files: schema, loading and validation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::fusion::{MeasurementModel, ProcessNoise};
use crate::geometry::Pose2D;
use crate::map::{load_map, CellState, OccupancyGrid};
use crate::mcl::MclConfig;
use crate::navigation::{NavConfig, PursuitController};
use crate::ndt::NdtParams;
use crate::odometry::WheelGeometry;
use crate::sim::{ControlInput, NoiseModel, ScanConfig};
use crate::worlds::{self, Shape};

pub const SCHEMA_VERSION: u32 = 1;

/// A complete simulation run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub map: MapSource,
    #[serde(default)]
    pub seed: u64,
    pub step_limit: usize,
    /// Control period of the autonomous controller, seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub start: Pose2D,
    #[serde(default)]
    pub wheel: WheelGeometry,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub mcl: MclSettings,
    #[serde(default)]
    pub ndt: NdtSettings,
    #[serde(default)]
    pub fusion: FusionSettings,
    #[serde(default)]
    pub navigation: NavigationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maneuvers: Option<Maneuvers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<[f64; 2]>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEvent>,
    #[serde(default)]
    pub require_goal: bool,
    /// Position error below which a step counts as localized, meters.
    #[serde(default = "default_localized_threshold")]
    pub localized_threshold: f64,
}

fn default_dt() -> f64 {
    0.1
}

fn default_localized_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinMap {
    FourRoom,
    Corridor,
    OpenRoom,
}

impl BuiltinMap {
    pub fn build(self) -> OccupancyGrid {
        match self {
            BuiltinMap::FourRoom => worlds::four_room_floorplan(),
            BuiltinMap::Corridor => worlds::corridor(),
            BuiltinMap::OpenRoom => worlds::open_room(10.0, 10.0, 0.05),
        }
    }
}

/// Either a built-in map or a PGM image with its JSON sidecar. Relative
/// paths are resolved against the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
}

/// Inline list of control records or a path to a JSON file holding one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Maneuvers {
    Inline(Vec<ControlInput>),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MclInit {
    /// Uniform over the free space.
    Global,
    /// Gaussian around the scenario start pose.
    Known { position_std: f64, heading_std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MclSettings {
    pub enabled: bool,
    pub init: MclInit,
    pub params: MclConfig,
}

impl Default for MclSettings {
    fn default() -> Self {
        Self { enabled: true, init: MclInit::Global, params: MclConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdtSettings {
    pub enabled: bool,
    /// Align on every n-th step; the pose is carried by odometry between.
    pub every: usize,
    pub params: NdtParams,
}

impl Default for NdtSettings {
    fn default() -> Self {
        Self { enabled: false, every: 1, params: NdtParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSource {
    Mcl,
    Ndt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    pub enabled: bool,
    pub source: MeasurementSource,
    /// Row-major observation matrix.
    pub h: [[f64; 3]; 3],
    pub r_diag: [f64; 3],
    pub q_diag: [f64; 3],
    pub initial_covariance_diag: [f64; 3],
    /// Update on every n-th step.
    pub every: usize,
    /// Squared Mahalanobis distance above which a measurement is skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            source: MeasurementSource::Mcl,
            h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            r_diag: [0.0025, 0.0025, 0.0025],
            q_diag: [1e-4, 1e-4, 1e-4],
            initial_covariance_diag: [0.01, 0.01, 0.01],
            every: 1,
            gate: None,
        }
    }
}

impl FusionSettings {
    pub fn measurement_model(&self) -> MeasurementModel {
        MeasurementModel {
            h: Matrix3::from_fn(|r, c| self.h[r][c]),
            r: Matrix3::from_diagonal(&Vector3::from(self.r_diag)),
        }
    }

    pub fn process_noise(&self) -> ProcessNoise {
        ProcessNoise::diagonal(Vector3::from(self.q_diag))
    }

    pub fn initial_covariance(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.initial_covariance_diag))
    }
}

/// Which estimate the navigator and controller act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    Truth,
    Odometry,
    Mcl,
    Ndt,
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationSettings {
    pub config: NavConfig,
    pub controller: PursuitController,
    pub pose_source: PoseSource,
}

impl Default for NavigationSettings {
    fn default() -> Self {
        Self { config: NavConfig::default(), controller: PursuitController::default(), pose_source: PoseSource::Fused }
    }
}

/// An obstacle absent from the localization map, present in the simulated
/// world on steps `appear_step <= k < clear_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEvent {
    pub shape: Shape,
    #[serde(default)]
    pub appear_step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear_step: Option<usize>,
}

impl ObstacleEvent {
    pub fn active_at(&self, step: usize) -> bool {
        self.appear_step <= step && self.clear_step.is_none_or(|c| step < c)
    }
}

/// Every problem found in a scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} problem(s):", self.0.len())?;
        for p in &self.0 {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

/// How the robot is driven.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    Scripted(Vec<ControlInput>),
    Autonomous { goal: Point2<f64> },
}

/// A validated scenario with its map loaded and file references resolved.
/// `scenario` is the fully materialized form written as the echo.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub map: OccupancyGrid,
    pub drive: Drive,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Problems that can be found without touching the file system.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                p.push(msg.to_string());
            }
        };
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();

        check(
            self.schema_version == SCHEMA_VERSION,
            &format!("schema_version must be {SCHEMA_VERSION}, got {}", self.schema_version),
        );
        let image_pair = self.map.image.is_some() || self.map.metadata.is_some();
        check(self.map.builtin.is_some() != image_pair, "map: give either `builtin` or `image` + `metadata`");
        check(
            !image_pair || (self.map.image.is_some() && self.map.metadata.is_some()),
            "map: `image` and `metadata` must be given together",
        );
        check(pos(self.dt), "dt must be positive");
        check(
            self.start.x.is_finite() && self.start.y.is_finite() && self.start.theta.is_finite(),
            "start must be finite",
        );
        if let Err(e) = self.wheel.validate() {
            check(false, &format!("wheel: {e}"));
        }
        let n = &self.noise;
        check(nonneg(n.encoder_tick_std), "noise.encoder_tick_std must be non-negative");
        check(nonneg(n.slip_factor_std), "noise.slip_factor_std must be non-negative");
        check(nonneg(n.range_std), "noise.range_std must be non-negative");
        check((0.0..=1.0).contains(&n.dropout_prob), "noise.dropout_prob must lie in [0, 1]");
        let s = &self.scan;
        check(s.beam_count > 0, "scan.beam_count must be at least 1");
        check(pos(s.angle_increment), "scan.angle_increment must be positive");
        check(s.angle_min.is_finite(), "scan.angle_min must be finite");
        check(pos(s.range_max), "scan.range_max must be positive");

        let m = &self.mcl.params;
        check(m.particles > 0, "mcl.params.particles must be at least 1");
        if let Err(e) = m.likelihood.validate() {
            check(false, &format!("mcl.params.likelihood: {e}"));
        }
        let mn = &m.motion_noise;
        check(
            nonneg(mn.trans_std_per_meter) && nonneg(mn.rot_std_per_rad) && nonneg(mn.rot_std_per_meter),
            "mcl.params.motion_noise entries must be non-negative",
        );
        check(pos(m.max_distance), "mcl.params.max_distance must be positive");
        check((0.0..=1.0).contains(&m.resample_threshold), "mcl.params.resample_threshold must lie in [0, 1]");
        if let MclInit::Known { position_std, heading_std } = self.mcl.init {
            check(nonneg(position_std) && nonneg(heading_std), "mcl.init standard deviations must be non-negative");
        }

        if let Err(e) = self.ndt.params.validate() {
            check(false, &format!("ndt.params: {e}"));
        }
        check(self.ndt.every > 0, "ndt.every must be at least 1");

        let f = &self.fusion;
        if f.enabled {
            if f.measurement_model().validate().is_err() {
                check(false, "fusion.r_diag must be positive");
            }
            if f.process_noise().validate().is_err() {
                check(false, "fusion.q_diag must be non-negative");
            }
            check(f.h.iter().flatten().all(|v| v.is_finite()), "fusion.h must be finite");
            check(
                f.initial_covariance_diag.iter().all(|v| nonneg(*v)),
                "fusion.initial_covariance_diag must be non-negative",
            );
            check(f.every > 0, "fusion.every must be at least 1");
            check(f.gate.is_none_or(pos), "fusion.gate must be positive");
            match f.source {
                MeasurementSource::Mcl => check(self.mcl.enabled, "fusion.source is mcl but mcl is disabled"),
                MeasurementSource::Ndt => check(self.ndt.enabled, "fusion.source is ndt but ndt is disabled"),
            }
        }

        let c = &self.navigation.config;
        check(pos(c.robot_radius), "navigation.config.robot_radius must be positive");
        check(pos(c.zone_radius), "navigation.config.zone_radius must be positive");
        check(nonneg(c.inflation_radius), "navigation.config.inflation_radius must be non-negative");
        check(pos(c.arrival_tolerance), "navigation.config.arrival_tolerance must be positive");
        check(pos(c.waypoint_spacing), "navigation.config.waypoint_spacing must be positive");
        check(nonneg(c.map_match_tolerance), "navigation.config.map_match_tolerance must be non-negative");
        let k = &self.navigation.controller;
        check(pos(k.v_max), "navigation.controller.v_max must be positive");
        check(pos(k.omega_max), "navigation.controller.omega_max must be positive");
        check(pos(k.heading_gain), "navigation.controller.heading_gain must be positive");
        check(nonneg(k.turn_in_place_above), "navigation.controller.turn_in_place_above must be non-negative");
        if self.goal.is_some() {
            let source_ok = match self.navigation.pose_source {
                PoseSource::Truth | PoseSource::Odometry => true,
                PoseSource::Mcl => self.mcl.enabled,
                PoseSource::Ndt => self.ndt.enabled,
                PoseSource::Fused => self.fusion.enabled,
            };
            check(source_ok, "navigation.pose_source names a disabled estimator");
        }

        check(self.maneuvers.is_some() != self.goal.is_some(), "exactly one of `maneuvers` and `goal` must be present");
        if let Some(Maneuvers::Inline(list)) = &self.maneuvers {
            for m in maneuver_problems(list) {
                check(false, &m);
            }
        }
        if let Some(g) = self.goal {
            check(g.iter().all(|v| v.is_finite()), "goal must be finite");
        }
        check(!(self.require_goal && self.goal.is_none()), "require_goal needs an autonomous `goal`");
        for (i, o) in self.obstacles.iter().enumerate() {
            match o.shape {
                Shape::Rect { min, max } => {
                    check(min[0] < max[0] && min[1] < max[1], &format!("obstacles[{i}]: rect min must be below max"))
                }
                Shape::Disc { radius, .. } => check(pos(radius), &format!("obstacles[{i}]: radius must be positive")),
            }
            check(
                o.clear_step.is_none_or(|c| c > o.appear_step),
                &format!("obstacles[{i}]: clear_step must come after appear_step"),
            );
        }
        check(pos(self.localized_threshold), "localized_threshold must be positive");
        p
    }

    /// Resolves files relative to `base`, loads the map and validates the
    /// whole scenario, reporting every problem at once.
    pub fn prepare(mut self, base: &Path) -> Result<PreparedScenario, HarnessError> {
        let mut problems = self.problems();
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        self.map.image = self.map.image.as_deref().map(resolve);
        self.map.metadata = self.map.metadata.as_deref().map(resolve);
        let map = match (&self.map.builtin, &self.map.image, &self.map.metadata) {
            (Some(b), None, None) => Some(b.build()),
            (None, Some(img), Some(meta)) => match load_map(img, meta) {
                Ok(m) => Some(m),
                Err(e) => {
                    problems.push(format!("map: {e}"));
                    None
                }
            },
            _ => None,
        };

        let maneuvers = match self.maneuvers.take() {
            Some(Maneuvers::File(path)) => {
                let path = resolve(&path);
                match read_maneuvers(&path) {
                    Ok(list) => {
                        problems.extend(maneuver_problems(&list));
                        Some(list)
                    }
                    Err(e) => {
                        problems.push(e);
                        None
                    }
                }
            }
            Some(Maneuvers::Inline(list)) => Some(list),
            None => None,
        };
        self.maneuvers = maneuvers.clone().map(Maneuvers::Inline);

        if let Some(map) = &map {
            let free = |p: Point2<f64>| map.world_to_grid(&p).map(|c| map.get(c) == CellState::Free);
            match free(self.start.position()) {
                None => problems.push("start lies outside the map".to_string()),
                Some(false) => problems.push("start lies in a non-free cell".to_string()),
                Some(true) => {}
            }
            if let Some(g) = self.goal {
                match free(Point2::new(g[0], g[1])) {
                    None => problems.push("goal lies outside the map".to_string()),
                    Some(false) => problems.push("goal lies in a non-free cell".to_string()),
                    Some(true) => {}
                }
            }
        }

        if !problems.is_empty() {
            return Err(HarnessError::Invalid(ValidationErrors(problems)));
        }
        let map = map.expect("no problems means the map loaded");
        let drive = match (maneuvers, self.goal) {
            (Some(list), None) => Drive::Scripted(list),
            (None, Some(g)) => Drive::Autonomous { goal: Point2::new(g[0], g[1]) },
            _ => unreachable!("checked by problems()"),
        };
        Ok(PreparedScenario { scenario: self, map, drive })
    }
}

fn maneuver_problems(list: &[ControlInput]) -> Vec<String> {
    list.iter()
        .enumerate()
        .filter(|(_, u)| {
            !(u.duration > 0.0 && u.duration.is_finite())
                || !u.linear_velocity.is_finite()
                || !u.angular_velocity.is_finite()
        })
        .map(|(i, _)| format!("maneuvers[{i}]: v and omega must be finite and dt positive"))
        .collect()
}

fn read_maneuvers(path: &Path) -> Result<Vec<ControlInput>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("maneuvers: cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("maneuvers: {}: {e}", path.display()))
}

/// Reads, parses and prepares a scenario file.
pub fn load_scenario(path: &Path) -> Result<PreparedScenario, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let scenario =
        Scenario::from_json(&text).map_err(|source| HarnessError::Parse { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    scenario.prepare(base)
}
