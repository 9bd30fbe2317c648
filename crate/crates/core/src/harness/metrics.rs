//! Trajectory error metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, Pose2D};
use crate::navigation::{BlockedZone, NavMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("trajectory lengths differ: truth {truth}, estimate {estimate}")]
    LengthMismatch { truth: usize, estimate: usize },
    #[error("trajectories are empty")]
    Empty,
}

fn check_lengths(truth: &[Pose2D], estimate: &[Pose2D]) -> Result<(), MetricsError> {
    if truth.len() != estimate.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), estimate: estimate.len() });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Root-mean-square position error, both trajectories in the map frame.
pub fn compute_ate(truth: &[Pose2D], estimate: &[Pose2D]) -> Result<f64, MetricsError> {
    check_lengths(truth, estimate)?;
    let sum: f64 = truth.iter().zip(estimate).map(|(t, e)| (t.x - e.x).powi(2) + (t.y - e.y).powi(2)).sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Mean absolute wrapped heading difference, radians.
pub fn mean_heading_error(truth: &[Pose2D], estimate: &[Pose2D]) -> Result<f64, MetricsError> {
    check_lengths(truth, estimate)?;
    let sum: f64 = truth.iter().zip(estimate).map(|(t, e)| angle_diff(e.theta, t.theta).abs()).sum();
    Ok(sum / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub ate_rmse: f64,
    pub final_position_error: f64,
    pub final_heading_error: f64,
    pub mean_heading_error: f64,
    /// Share of steps with position error below the scenario threshold, in percent.
    pub percent_localized: f64,
}

impl EstimatorMetrics {
    pub fn compute(truth: &[Pose2D], estimate: &[Pose2D], threshold: f64) -> Result<Self, MetricsError> {
        let ate_rmse = compute_ate(truth, estimate)?;
        let (t, e) = (truth[truth.len() - 1], estimate[estimate.len() - 1]);
        let localized = truth.iter().zip(estimate).filter(|(t, e)| t.distance_to(e) < threshold).count();
        Ok(Self {
            ate_rmse,
            final_position_error: t.distance_to(&e),
            final_heading_error: angle_diff(e.theta, t.theta).abs(),
            mean_heading_error: mean_heading_error(truth, estimate)?,
            percent_localized: 100.0 * localized as f64 / truth.len() as f64,
        })
    }
}

/// Summary of one run. Every estimator is scored over the same steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps: usize,
    pub goal_reached: bool,
    pub halts: usize,
    /// Steps on which the robot footprint overlapped an occupied cell.
    pub collisions: usize,
    pub final_nav_mode: Option<NavMode>,
    /// NDT alignments that did not converge.
    pub ndt_failures: usize,
    /// Fusion updates rejected by the gate.
    pub gated_measurements: usize,
    pub estimators: BTreeMap<String, EstimatorMetrics>,
    pub blocked_zones: Vec<BlockedZone>,
    /// Remaining route at the end of the run.
    pub waypoints: Vec<[f64; 2]>,
}
