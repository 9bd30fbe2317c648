//! Planar pose and angle helpers shared by every module.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Wraps an angle into the half-open interval (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Signed shortest rotation taking `from` onto `to`, in (-pi, pi].
pub fn angle_diff(to: f64, from: f64) -> f64 {
    normalize_angle(to - from)
}

/// Planar robot pose. `theta` is kept in (-pi, pi] by every constructor and
/// operation that writes it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn inverse_transform_point(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// SE(2) composition `self * other`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let p = self.transform_point(&other.position());
        Pose2D::new(p.x, p.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Absolute wrapped heading difference.
    pub fn heading_error(&self, other: &Pose2D) -> f64 {
        angle_diff(self.theta, other.theta).abs()
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from(v: [f64; 3]) -> Self {
        Pose2D::new(v[0], v[1], v[2])
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// Unit vector pointing along `bearing`.
pub fn heading_vector(bearing: f64) -> Vector2<f64> {
    let (s, c) = bearing.sin_cos();
    Vector2::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normalize_keeps_pi_and_maps_minus_pi_to_pi() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(normalize_angle(0.0), 0.0);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose2D::new(1.5, -2.0, 0.7);
        let id = p.compose(&p.inverse());
        assert_abs_diff_eq!(id.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_round_trip() {
        let p = Pose2D::new(1.0, 1.0, PI / 2.0);
        let q = p.transform_point(&Point2::new(2.0, 0.0));
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.y, 3.0, epsilon = 1e-12);
        let back = p.inverse_transform_point(&q);
        assert_abs_diff_eq!(back.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn normalize_is_periodic(a in -10.0f64..10.0, k in -1000i32..=1000) {
            let shifted = normalize_angle(a + TAU * f64::from(k));
            let base = normalize_angle(a);
            // compare as angles so that pi and -pi+eps count as neighbours
            prop_assert!(angle_diff(shifted, base).abs() <= 1e-9);
            prop_assert!(shifted > -PI && shifted <= PI);
        }
    }
}
