use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;

/// One revolution of planar range readings. A reading equal to `range_max`
/// means the beam saw nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    /// Beam bearing relative to the sensor heading.
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    pub fn is_return(&self, range: f64) -> bool {
        range < self.range_max
    }

    /// Indices and ranges of beams that produced a return.
    pub fn returns(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.ranges.iter().enumerate().filter(|(_, r)| self.is_return(**r)).map(|(i, r)| (i, *r))
    }

    /// Return endpoints in the sensor frame.
    pub fn points(&self) -> Vec<Point2<f64>> {
        self.returns()
            .map(|(i, r)| {
                let (s, c) = self.beam_angle(i).sin_cos();
                Point2::new(r * c, r * s)
            })
            .collect()
    }

    /// Return endpoints projected into the world from `pose`.
    pub fn world_points(&self, pose: &Pose2D) -> Vec<Point2<f64>> {
        self.points().iter().map(|p| pose.transform_point(p)).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.range_max > 0.0 && self.ranges.iter().all(|r| *r > 0.0 && *r <= self.range_max)
    }
}
