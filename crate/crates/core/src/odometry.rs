//! Differential-drive wheel odometry: encoder ticks to wheel distances, wheel
//! distances to a pose increment, and midpoint-heading pose integration.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("wheel_radius must be positive, got {0}")]
    WheelRadius(f64),
    #[error("track_width must be positive, got {0}")]
    TrackWidth(f64),
    #[error("ticks_per_rev must be at least 1")]
    TicksPerRev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelGeometry {
    pub wheel_radius: f64,
    pub track_width: f64,
    pub ticks_per_rev: u32,
}

impl WheelGeometry {
    pub fn new(wheel_radius: f64, track_width: f64, ticks_per_rev: u32) -> Result<Self, GeometryError> {
        let g = Self { wheel_radius, track_width, ticks_per_rev };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.wheel_radius > 0.0 && self.wheel_radius.is_finite()) {
            return Err(GeometryError::WheelRadius(self.wheel_radius));
        }
        if !(self.track_width > 0.0 && self.track_width.is_finite()) {
            return Err(GeometryError::TrackWidth(self.track_width));
        }
        if self.ticks_per_rev == 0 {
            return Err(GeometryError::TicksPerRev);
        }
        Ok(())
    }

    /// Wheel travel represented by a single encoder tick.
    pub fn distance_per_tick(&self) -> f64 {
        TAU * self.wheel_radius / f64::from(self.ticks_per_rev)
    }
}

impl Default for WheelGeometry {
    fn default() -> Self {
        Self { wheel_radius: 0.05, track_width: 0.3, ticks_per_rev: 1000 }
    }
}

/// Signed tick counts accumulated since the previous reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncoderReading {
    pub left_ticks: i64,
    pub right_ticks: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub d_left: f64,
    pub d_right: f64,
    pub d_avg: f64,
    pub d_theta: f64,
}

impl OdometryDelta {
    /// A delta described only by its travelled distance and rotation; the
    /// per-wheel fields are filled in for the given track width.
    pub fn from_motion(d_avg: f64, d_theta: f64, track_width: f64) -> Self {
        Self {
            d_left: d_avg - 0.5 * track_width * d_theta,
            d_right: d_avg + 0.5 * track_width * d_theta,
            d_avg,
            d_theta,
        }
    }
}

/// D = 2 pi r N / N_total, evaluated in floating point.
pub fn ticks_to_distance(geom: &WheelGeometry, ticks: i64) -> f64 {
    TAU * geom.wheel_radius * (ticks as f64 / f64::from(geom.ticks_per_rev))
}

pub fn wheel_delta(geom: &WheelGeometry, reading: &EncoderReading) -> OdometryDelta {
    let d_left = ticks_to_distance(geom, reading.left_ticks);
    let d_right = ticks_to_distance(geom, reading.right_ticks);
    OdometryDelta { d_left, d_right, d_avg: (d_left + d_right) / 2.0, d_theta: (d_right - d_left) / geom.track_width }
}

/// Midpoint-heading update: the translation is applied along theta + dtheta/2.
pub fn integrate_pose(pose: &Pose2D, delta: &OdometryDelta) -> Pose2D {
    integrate_motion(pose, delta.d_avg, delta.d_theta)
}

/// [`integrate_pose`] for a bare (distance, rotation) pair.
pub fn integrate_motion(pose: &Pose2D, d_avg: f64, d_theta: f64) -> Pose2D {
    let heading = pose.theta + 0.5 * d_theta;
    let (s, c) = heading.sin_cos();
    Pose2D { x: pose.x + d_avg * c, y: pose.y + d_avg * s, theta: normalize_angle(pose.theta + d_theta) }
}
