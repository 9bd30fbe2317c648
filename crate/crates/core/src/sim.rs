//! The simulated world: exact unicycle ground truth plus noisy wheel encoders
//! and a noisy planar LiDAR raycast against the world map.

use std::f64::consts::PI;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, Pose2D};
use crate::map::{raycast, OccupancyGrid};
use crate::odometry::{EncoderReading, WheelGeometry};
use crate::rng::{gaussian, unit};
use crate::scan::LidarScan;

/// Shortest range a noisy beam may report.
pub const MIN_RANGE: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("pose ({x:.3}, {y:.3}) lies outside the map")]
    PoseOutsideMap { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    #[serde(rename = "v")]
    pub linear_velocity: f64,
    #[serde(rename = "omega")]
    pub angular_velocity: f64,
    #[serde(rename = "dt")]
    pub duration: f64,
}

impl ControlInput {
    pub fn new(linear_velocity: f64, angular_velocity: f64, duration: f64) -> Self {
        Self { linear_velocity, angular_velocity, duration }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub encoder_tick_std: f64,
    pub slip_factor_std: f64,
    pub range_std: f64,
    pub dropout_prob: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { encoder_tick_std: 0.0, slip_factor_std: 0.0, range_std: 0.0, dropout_prob: 0.0 }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { encoder_tick_std: 1.0, slip_factor_std: 0.02, range_std: 0.02, dropout_prob: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub beam_count: usize,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { beam_count: 360, angle_min: -PI, angle_increment: PI / 180.0, range_max: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub step_index: u64,
    pub step_duration: f64,
    pub rng_seed: u64,
}

impl SimClock {
    pub fn new(step_duration: f64, rng_seed: u64) -> Self {
        Self { step_index: 0, step_duration, rng_seed }
    }

    pub fn tick(&mut self) -> u64 {
        self.step_index += 1;
        self.step_index
    }
}

/// sin(x)/x with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Exact unicycle motion: a straight segment when omega is zero, otherwise a
/// circular arc of radius v/omega swept through omega*dt.
pub fn step_truth(pose: &Pose2D, u: &ControlInput) -> Pose2D {
    let sweep = u.angular_velocity * u.duration;
    let arc = u.linear_velocity * u.duration;
    let chord = arc * sinc(0.5 * sweep);
    let heading = pose.theta + 0.5 * sweep;
    let (s, c) = heading.sin_cos();
    Pose2D::new(pose.x + chord * c, pose.y + chord * s, pose.theta + sweep)
}

/// Arc length and rotation of the unicycle step joining two poses. The step
/// must turn by less than pi.
pub fn step_motion(prev: &Pose2D, next: &Pose2D) -> (f64, f64) {
    let d_theta = angle_diff(next.theta, prev.theta);
    let heading = prev.theta + 0.5 * d_theta;
    let (s, c) = heading.sin_cos();
    let chord = (next.x - prev.x) * c + (next.y - prev.y) * s;
    (chord / sinc(0.5 * d_theta), d_theta)
}

/// Encoder ticks a differential drive would report for the step between two
/// truth poses, with multiplicative slip and additive tick noise.
pub fn synth_encoders<R: RngCore + ?Sized>(
    prev: &Pose2D,
    next: &Pose2D,
    geom: &WheelGeometry,
    noise: &NoiseModel,
    rng: &mut R,
) -> EncoderReading {
    let (d_avg, d_theta) = step_motion(prev, next);
    let half_track = 0.5 * geom.track_width * d_theta;
    let d_left = (d_avg - half_track) * (1.0 + gaussian(rng, noise.slip_factor_std));
    let d_right = (d_avg + half_track) * (1.0 + gaussian(rng, noise.slip_factor_std));
    let per_tick = geom.distance_per_tick();
    let left = (d_left / per_tick).round() + gaussian(rng, noise.encoder_tick_std).round();
    let right = (d_right / per_tick).round() + gaussian(rng, noise.encoder_tick_std).round();
    EncoderReading { left_ticks: left as i64, right_ticks: right as i64 }
}

/// A planar scan from `pose`: exact raycast, Gaussian range noise on returns,
/// and independent beam dropouts that read `range_max`.
pub fn synth_scan<R: RngCore + ?Sized>(
    pose: &Pose2D,
    map: &OccupancyGrid,
    config: &ScanConfig,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<LidarScan, SimError> {
    let origin = pose.position();
    if !map.contains_point(&origin) {
        return Err(SimError::PoseOutsideMap { x: pose.x, y: pose.y });
    }
    let range_max = config.range_max;
    let ranges = (0..config.beam_count)
        .map(|i| {
            let bearing = pose.theta + config.angle_min + i as f64 * config.angle_increment;
            let truth = raycast(map, &origin, bearing, range_max).expect("origin checked above");
            let dropped = noise.dropout_prob > 0.0 && unit(rng) < noise.dropout_prob;
            let jitter = gaussian(rng, noise.range_std);
            if dropped || truth >= range_max {
                range_max
            } else {
                (truth + jitter).clamp(MIN_RANGE, range_max)
            }
        })
        .collect();
    Ok(LidarScan { angle_min: config.angle_min, angle_increment: config.angle_increment, range_max, ranges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::map::{CellIndex, CellState};
    use crate::odometry::{integrate_pose, wheel_delta};
    use crate::rng::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn unicycle_examples() {
        let p = step_truth(&Pose2D::identity(), &ControlInput::new(1.0, 0.0, 1.0));
        assert_eq!(p, Pose2D::new(1.0, 0.0, 0.0));
        let p = step_truth(&Pose2D::identity(), &ControlInput::new(0.0, FRAC_PI_2, 1.0));
        assert_abs_diff_eq!(p.x, 0.0);
        assert_abs_diff_eq!(p.theta, FRAC_PI_2, epsilon = 1e-15);
        let p = step_truth(&Pose2D::identity(), &ControlInput::new(FRAC_PI_2, FRAC_PI_2, 1.0));
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.theta, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_encoder_examples() {
        let geom = WheelGeometry::new(0.05, 0.5, 1000).unwrap();
        let mut rng = stream_rng(0, Stream::Encoders, 0);
        let quiet = NoiseModel::noiseless();
        let r = synth_encoders(&Pose2D::identity(), &Pose2D::new(1.0, 0.0, 0.0), &geom, &quiet, &mut rng);
        assert_eq!(r, EncoderReading { left_ticks: 3183, right_ticks: 3183 });
        let p = Pose2D::new(2.0, 1.0, 0.5);
        assert_eq!(synth_encoders(&p, &p, &geom, &quiet, &mut rng), EncoderReading::default());
        let r = synth_encoders(&p, &Pose2D::new(2.0, 1.0, 0.9), &geom, &quiet, &mut rng);
        assert_eq!(r.left_ticks, -r.right_ticks);
        assert!(r.right_ticks > 0);
    }

    #[test]
    fn encoders_reproduce_truth_within_a_tick() {
        let geom = WheelGeometry::default();
        let mut rng = stream_rng(3, Stream::Encoders, 0);
        let mut truth = Pose2D::new(1.0, -1.0, 2.0);
        for k in 0..200 {
            let u = ControlInput::new(0.4 + 0.1 * (k as f64 * 0.3).sin(), 0.8 * (k as f64 * 0.1).cos(), 0.1);
            let next = step_truth(&truth, &u);
            let reading = synth_encoders(&truth, &next, &geom, &NoiseModel::noiseless(), &mut rng);
            let est = integrate_pose(&truth, &wheel_delta(&geom, &reading));
            assert!(est.distance_to(&next) <= geom.distance_per_tick() * 1.0001);
            truth = next;
        }
    }

    fn wall_map() -> OccupancyGrid {
        let mut map = OccupancyGrid::filled(10, 10, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        for iy in 0..10 {
            map.set(CellIndex::new(5, iy), CellState::Occupied);
        }
        map
    }

    #[test]
    fn scan_examples() {
        let cfg = ScanConfig { beam_count: 8, angle_min: 0.0, angle_increment: PI / 4.0, range_max: 3.0 };
        let mut rng = stream_rng(0, Stream::Lidar, 0);
        let empty = OccupancyGrid::filled(100, 100, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        let s = synth_scan(&Pose2D::new(5.0, 5.0, 0.3), &empty, &cfg, &NoiseModel::noiseless(), &mut rng).unwrap();
        assert!(s.ranges.iter().all(|r| *r == 3.0));

        let s =
            synth_scan(&Pose2D::new(0.05, 0.05, 0.0), &wall_map(), &cfg, &NoiseModel::noiseless(), &mut rng).unwrap();
        assert_abs_diff_eq!(s.ranges[0], 0.45, epsilon = 1e-12);

        let drop_all = NoiseModel { dropout_prob: 1.0, ..NoiseModel::noiseless() };
        let s = synth_scan(&Pose2D::new(0.05, 0.05, 0.0), &wall_map(), &cfg, &drop_all, &mut rng).unwrap();
        assert!(s.ranges.iter().all(|r| *r == 3.0));

        assert!(matches!(
            synth_scan(&Pose2D::new(-1.0, 0.0, 0.0), &wall_map(), &cfg, &NoiseModel::noiseless(), &mut rng),
            Err(SimError::PoseOutsideMap { .. })
        ));
    }

    #[test]
    fn noisy_scan_stays_in_range() {
        let cfg = ScanConfig::default();
        let noise = NoiseModel { range_std: 0.5, dropout_prob: 0.2, ..NoiseModel::noiseless() };
        let mut rng = stream_rng(9, Stream::Lidar, 0);
        let s = synth_scan(&Pose2D::new(0.05, 0.05, 0.0), &wall_map(), &cfg, &noise, &mut rng).unwrap();
        assert_eq!(s.ranges.len(), 360);
        assert!(s.is_valid());
    }

    #[test]
    fn clock_ticks() {
        let mut c = SimClock::new(0.1, 5);
        assert_eq!(c.tick(), 1);
        assert_eq!(c.tick(), 2);
        assert_eq!(c.step_duration, 0.1);
    }
}
