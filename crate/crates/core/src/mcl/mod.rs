//! Monte Carlo localization against an occupancy grid.
//!
//! Particles are advanced with the odometry increment plus motion noise,
//! weighted with a likelihood-field sensor model evaluated on a precomputed
//! distance transform, and resampled systematically when the effective
//! sample size drops below a fraction of the particle count.

mod field;
mod resample;

pub use field::{precompute_distance_field, DistanceField};
pub use resample::{resample, resample_n};

use std::f64::consts::PI;

use nalgebra::Point2;
use rand::{Rng, RngCore};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;
use crate::map::{CellState, OccupancyGrid};
use crate::odometry::{integrate_motion, OdometryDelta};
use crate::rng::{gaussian, stream_rng, unit, Stream};
use crate::scan::LidarScan;

#[derive(Debug, Error, PartialEq)]
pub enum MclError {
    #[error("map has no FREE cell to place particles in")]
    NoFreeCells,
    #[error("particle count must be at least 1")]
    NoParticles,
    #[error("particle weights are all zero or not finite")]
    DegenerateWeights,
    #[error("invalid parameter `{field}`: {message}")]
    BadParameter { field: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn from_poses(poses: impl IntoIterator<Item = Pose2D>) -> Self {
        let mut particles: Vec<Particle> = poses.into_iter().map(|pose| Particle { pose, weight: 1.0 }).collect();
        let w = 1.0 / particles.len().max(1) as f64;
        particles.iter_mut().for_each(|p| p.weight = w);
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn normalize(&mut self) -> Result<(), MclError> {
        let total = self.total_weight();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MclError::DegenerateWeights);
        }
        self.particles.iter_mut().for_each(|p| p.weight /= total);
        Ok(())
    }

    /// 1 / sum(w^2) of the normalized weights.
    pub fn effective_sample_size(&self) -> f64 {
        let total = self.total_weight();
        let sq: f64 = self.particles.iter().map(|p| (p.weight / total).powi(2)).sum();
        1.0 / sq
    }

    /// Weighted standard deviation of particle positions, in meters.
    pub fn position_spread(&self) -> f64 {
        let est = estimate(self);
        let total = self.total_weight();
        let var: f64 = self
            .particles
            .iter()
            .map(|p| p.weight * ((p.pose.x - est.x).powi(2) + (p.pose.y - est.y).powi(2)))
            .sum::<f64>()
            / total;
        var.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionNoiseParams {
    pub trans_std_per_meter: f64,
    pub rot_std_per_rad: f64,
    pub rot_std_per_meter: f64,
}

impl Default for MotionNoiseParams {
    fn default() -> Self {
        Self { trans_std_per_meter: 0.1, rot_std_per_rad: 0.1, rot_std_per_meter: 0.05 }
    }
}

impl MotionNoiseParams {
    pub fn none() -> Self {
        Self { trans_std_per_meter: 0.0, rot_std_per_rad: 0.0, rot_std_per_meter: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodFieldParams {
    pub sigma_hit: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    pub beam_stride: usize,
}

impl Default for LikelihoodFieldParams {
    fn default() -> Self {
        Self { sigma_hit: 0.3, z_hit: 0.95, z_rand: 0.05, beam_stride: 4 }
    }
}

impl LikelihoodFieldParams {
    pub fn validate(&self) -> Result<(), MclError> {
        let bad = |field, message: &str| Err(MclError::BadParameter { field, message: message.to_string() });
        if self.sigma_hit.is_nan() || self.sigma_hit <= 0.0 {
            return bad("sigma_hit", "must be positive");
        }
        if self.z_hit < 0.0 || self.z_rand < 0.0 || ((self.z_hit + self.z_rand) - 1.0).abs() > 1e-9 {
            return bad("z_hit", "z_hit and z_rand must be non-negative and sum to 1");
        }
        if self.beam_stride == 0 {
            return bad("beam_stride", "must be at least 1");
        }
        Ok(())
    }
}

/// Uniform placement over FREE cells with headings in (-pi, pi] and equal
/// weights.
pub fn init_uniform<R: RngCore + ?Sized>(
    map: &OccupancyGrid,
    count: usize,
    rng: &mut R,
) -> Result<ParticleSet, MclError> {
    if count == 0 {
        return Err(MclError::NoParticles);
    }
    let free: Vec<_> = map.iter_cells().filter(|(_, s)| *s == CellState::Free).map(|(c, _)| c).collect();
    if free.is_empty() {
        return Err(MclError::NoFreeCells);
    }
    let res = map.resolution();
    let o = map.origin();
    let poses = (0..count).map(|_| {
        let cell = free[rng.random_range(0..free.len())];
        let x = o.x + (cell.ix as f64 + unit(rng)) * res;
        let y = o.y + (cell.iy as f64 + unit(rng)) * res;
        let theta = PI - unit(rng) * 2.0 * PI;
        Pose2D::new(x, y, theta)
    });
    Ok(ParticleSet::from_poses(poses.collect::<Vec<_>>()))
}

/// Gaussian cloud around a known pose.
pub fn init_gaussian<R: RngCore + ?Sized>(
    center: &Pose2D,
    count: usize,
    position_std: f64,
    heading_std: f64,
    rng: &mut R,
) -> Result<ParticleSet, MclError> {
    if count == 0 {
        return Err(MclError::NoParticles);
    }
    let poses: Vec<Pose2D> = (0..count)
        .map(|_| {
            Pose2D::new(
                center.x + gaussian(rng, position_std),
                center.y + gaussian(rng, position_std),
                center.theta + gaussian(rng, heading_std),
            )
        })
        .collect();
    Ok(ParticleSet::from_poses(poses))
}

/// Advances every particle by the odometry increment with independently
/// perturbed distance and rotation. Each particle draws from its own
/// substream keyed by one value taken from `rng`, so the result does not
/// depend on evaluation order.
pub fn motion_update<R: RngCore + ?Sized>(
    set: &mut ParticleSet,
    delta: &OdometryDelta,
    noise: &MotionNoiseParams,
    rng: &mut R,
) {
    let key = rng.next_u64();
    let trans_std = noise.trans_std_per_meter * delta.d_avg.abs();
    let rot_std = noise.rot_std_per_rad * delta.d_theta.abs() + noise.rot_std_per_meter * delta.d_avg.abs();
    for (i, p) in set.particles.iter_mut().enumerate() {
        let mut prng: Pcg64 = stream_rng(key, Stream::MclMotion, i as u64);
        let d_avg = delta.d_avg + gaussian(&mut prng, trans_std);
        let d_theta = delta.d_theta + gaussian(&mut prng, rot_std);
        p.pose = integrate_motion(&p.pose, d_avg, d_theta);
    }
}

/// Result of one likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOutcome {
    /// Beams that entered the product.
    pub beams_used: usize,
    /// Per-beam mean log-likelihood of the best particle, trimmed.
    pub best_mean_log_likelihood: f64,
    /// The best particle explains the scan worse than the configured floor.
    pub lost: bool,
}

/// Per-particle log-likelihood of the scan under the likelihood-field model.
pub fn scan_log_likelihood(
    pose: &Pose2D,
    endpoints: &[Point2<f64>],
    field: &DistanceField,
    params: &LikelihoodFieldParams,
    range_max: f64,
) -> f64 {
    let inv_two_var = 1.0 / (2.0 * params.sigma_hit * params.sigma_hit);
    let floor = params.z_rand / range_max;
    endpoints
        .iter()
        .map(|e| {
            let d = field.distance_at(&pose.transform_point(e));
            (params.z_hit * (-d * d * inv_two_var).exp() + floor).ln()
        })
        .sum()
}

/// Mean per-beam log-likelihood after discarding the `trim` fraction of
/// worst-explained beams, so that a minority of returns from unmapped
/// objects does not read as a wrong pose.
pub fn trimmed_mean_log_likelihood(
    pose: &Pose2D,
    endpoints: &[Point2<f64>],
    field: &DistanceField,
    params: &LikelihoodFieldParams,
    range_max: f64,
    trim: f64,
) -> f64 {
    let mut per_beam: Vec<f64> = endpoints
        .iter()
        .map(|e| scan_log_likelihood(pose, std::slice::from_ref(e), field, params, range_max))
        .collect();
    if per_beam.is_empty() {
        return 0.0;
    }
    per_beam.sort_by(|a, b| b.total_cmp(a));
    let keep = ((per_beam.len() as f64 * (1.0 - trim.clamp(0.0, 1.0))).ceil() as usize).max(1);
    per_beam[..keep].iter().sum::<f64>() / keep as f64
}

/// Sensor-frame endpoints of the beams used by the likelihood model.
pub fn sampled_endpoints(scan: &LidarScan, stride: usize) -> Vec<Point2<f64>> {
    scan.returns()
        .filter(|(i, _)| i % stride == 0)
        .map(|(i, r)| {
            let (s, c) = scan.beam_angle(i).sin_cos();
            Point2::new(r * c, r * s)
        })
        .collect()
}

/// Multiplies each weight by the scan likelihood (accumulated in log space)
/// and renormalizes. Beams reading `range_max` are skipped.
pub fn weight_update(
    set: &mut ParticleSet,
    scan: &LidarScan,
    field: &DistanceField,
    params: &LikelihoodFieldParams,
    lost_floor: f64,
    lost_trim: f64,
) -> WeightOutcome {
    let endpoints = sampled_endpoints(scan, params.beam_stride.max(1));
    if endpoints.is_empty() || set.is_empty() {
        return WeightOutcome { beams_used: 0, best_mean_log_likelihood: 0.0, lost: false };
    }
    let log_lik: Vec<f64> =
        set.particles.iter().map(|p| scan_log_likelihood(&p.pose, &endpoints, field, params, scan.range_max)).collect();
    let best = (0..log_lik.len())
        .max_by(|&a, &b| log_lik[a].total_cmp(&log_lik[b]).then(b.cmp(&a)))
        .expect("set is non-empty");
    let mean_best = if lost_trim > 0.0 {
        let pose = set.particles[best].pose;
        trimmed_mean_log_likelihood(&pose, &endpoints, field, params, scan.range_max, lost_trim)
    } else {
        log_lik[best] / endpoints.len() as f64
    };

    let log_w: Vec<f64> = set.particles.iter().zip(&log_lik).map(|(p, l)| p.weight.ln() + l).collect();
    let shift = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !shift.is_finite();
    if degenerate {
        let w = 1.0 / set.len() as f64;
        set.particles.iter_mut().for_each(|p| p.weight = w);
    } else {
        for (p, lw) in set.particles.iter_mut().zip(&log_w) {
            p.weight = (lw - shift).exp();
        }
        set.normalize().expect("max-shifted weights include a 1");
    }
    WeightOutcome {
        beams_used: endpoints.len(),
        best_mean_log_likelihood: mean_best,
        lost: degenerate || mean_best < lost_floor,
    }
}

/// Weighted mean position and circular-mean heading.
pub fn estimate(set: &ParticleSet) -> Pose2D {
    let total = set.total_weight();
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for p in &set.particles {
        let w = p.weight / total;
        x += w * p.pose.x;
        y += w * p.pose.y;
        s += w * p.pose.theta.sin();
        c += w * p.pose.theta.cos();
    }
    Pose2D::new(x, y, s.atan2(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MclConfig {
    pub particles: usize,
    pub motion_noise: MotionNoiseParams,
    pub likelihood: LikelihoodFieldParams,
    /// Cap of the distance field, in meters.
    pub max_distance: f64,
    /// Per-beam mean log-likelihood below which the filter reports lost.
    pub lost_floor: f64,
    /// Fraction of worst-explained beams left out of the lost statistic.
    pub lost_trim: f64,
    /// Resample when the effective sample size falls below this fraction
    /// of the particle count.
    pub resample_threshold: f64,
    pub reinit_on_lost: bool,
    /// Consecutive lost cycles tolerated before reinitializing, giving a
    /// fresh cloud time to settle on its local optimum.
    pub lost_patience: usize,
    /// A lost filter redraws this many uniform candidates per particle,
    /// weights them on the current scan and resamples down to `particles`.
    pub reinit_oversampling: usize,
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            motion_noise: MotionNoiseParams::default(),
            likelihood: LikelihoodFieldParams::default(),
            max_distance: 2.0,
            lost_floor: -0.3,
            lost_trim: 0.0,
            resample_threshold: 0.5,
            reinit_on_lost: true,
            lost_patience: 3,
            reinit_oversampling: 10,
        }
    }
}

/// Outcome of one filter cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MclStep {
    pub estimate: Pose2D,
    pub lost: bool,
    pub reinitialized: bool,
    pub resampled: bool,
    pub effective_sample_size: f64,
}

/// A particle filter bound to one map, owning its random streams.
#[derive(Debug, Clone)]
pub struct MonteCarloLocalizer {
    config: MclConfig,
    map: OccupancyGrid,
    field: DistanceField,
    set: ParticleSet,
    init_rng: Pcg64,
    motion_rng: Pcg64,
    resample_rng: Pcg64,
    lost_streak: usize,
}

impl MonteCarloLocalizer {
    /// Builds the filter and spreads particles uniformly over the map.
    pub fn new(map: &OccupancyGrid, config: MclConfig, seed: u64) -> Result<Self, MclError> {
        config.likelihood.validate()?;
        if config.particles == 0 {
            return Err(MclError::NoParticles);
        }
        let mut init_rng = stream_rng(seed, Stream::MclInit, 0);
        let set = init_uniform(map, config.particles, &mut init_rng)?;
        Ok(Self {
            config,
            map: map.clone(),
            field: precompute_distance_field(map, config.max_distance),
            set,
            init_rng,
            motion_rng: stream_rng(seed, Stream::MclMotion, 0),
            resample_rng: stream_rng(seed, Stream::MclResample, 0),
            lost_streak: 0,
        })
    }

    pub fn config(&self) -> &MclConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn field(&self) -> &DistanceField {
        &self.field
    }

    pub fn estimate(&self) -> Pose2D {
        estimate(&self.set)
    }

    pub fn reinitialize_global(&mut self) -> Result<(), MclError> {
        self.set = init_uniform(&self.map, self.config.particles, &mut self.init_rng)?;
        Ok(())
    }

    /// Uniform redraw of `reinit_oversampling` candidates per particle,
    /// importance-resampled to the configured count on `scan`.
    pub fn reinitialize_from_scan(&mut self, scan: &LidarScan) -> Result<(), MclError> {
        let count = self.config.particles;
        let pool = count * self.config.reinit_oversampling.max(1);
        let mut candidates = init_uniform(&self.map, pool, &mut self.init_rng)?;
        weight_update(&mut candidates, scan, &self.field, &self.config.likelihood, f64::NEG_INFINITY, 0.0);
        self.set = resample_n(&candidates, count, &mut self.resample_rng)?;
        Ok(())
    }

    pub fn reinitialize_around(&mut self, pose: &Pose2D, position_std: f64, heading_std: f64) -> Result<(), MclError> {
        self.set = init_gaussian(pose, self.config.particles, position_std, heading_std, &mut self.init_rng)?;
        Ok(())
    }

    /// Motion update, weighting, lost handling and conditional resampling.
    pub fn update(&mut self, delta: &OdometryDelta, scan: &LidarScan) -> Result<MclStep, MclError> {
        motion_update(&mut self.set, delta, &self.config.motion_noise, &mut self.motion_rng);
        let outcome = weight_update(
            &mut self.set,
            scan,
            &self.field,
            &self.config.likelihood,
            self.config.lost_floor,
            self.config.lost_trim,
        );
        let mut reinitialized = false;
        let mut resampled = false;
        let ess = self.set.effective_sample_size();
        self.lost_streak = if outcome.lost { self.lost_streak + 1 } else { 0 };
        if self.config.reinit_on_lost && self.lost_streak >= self.config.lost_patience.max(1) {
            self.reinitialize_from_scan(scan)?;
            self.lost_streak = 0;
            reinitialized = true;
        } else if ess < self.config.resample_threshold * self.set.len() as f64 {
            self.set = resample(&self.set, &mut self.resample_rng)?;
            resampled = true;
        }
        Ok(MclStep {
            estimate: self.estimate(),
            lost: outcome.lost,
            reinitialized,
            resampled,
            effective_sample_size: ess,
        })
    }
}
