//! Kalman fusion of odometry prediction with scan-derived pose measurements.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D};
use crate::odometry::{integrate_pose, OdometryDelta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("degenerate innovation covariance")]
    DegenerateInnovation,
    #[error("measurement noise covariance must be symmetric positive definite")]
    BadMeasurementNoise,
    #[error("process noise covariance must be symmetric positive semidefinite")]
    BadProcessNoise,
}

/// Pose estimate (x, y, theta) and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedState {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl FusedState {
    pub fn new(pose: &Pose2D, covariance: Matrix3<f64>) -> Self {
        Self { mean: pose.to_vector(), covariance: symmetrize(&covariance) }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::from_vector(&self.mean)
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    pub h: Matrix3<f64>,
    pub r: Matrix3<f64>,
}

impl MeasurementModel {
    /// Direct pose observation with diagonal noise.
    pub fn pose(r_diag: Vector3<f64>) -> Self {
        Self { h: Matrix3::identity(), r: Matrix3::from_diagonal(&r_diag) }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let symmetric = (self.r - self.r.transpose()).amax() <= 1e-12 * self.r.amax().max(1.0);
        if symmetric && self.r.cholesky().is_some() {
            Ok(())
        } else {
            Err(FusionError::BadMeasurementNoise)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    pub q: Matrix3<f64>,
}

impl ProcessNoise {
    pub fn diagonal(q_diag: Vector3<f64>) -> Self {
        Self { q: Matrix3::from_diagonal(&q_diag) }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let symmetric = (self.q - self.q.transpose()).amax() <= 1e-12 * self.q.amax().max(1.0);
        let min_eig = self.q.symmetric_eigenvalues().min();
        if symmetric && min_eig >= -1e-12 {
            Ok(())
        } else {
            Err(FusionError::BadProcessNoise)
        }
    }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m + m.transpose())
}

/// Jacobian of the midpoint pose update with respect to (x, y, theta).
pub fn motion_jacobian(pose: &Pose2D, delta: &OdometryDelta) -> Matrix3<f64> {
    let heading = pose.theta + 0.5 * delta.d_theta;
    let (s, c) = heading.sin_cos();
    let mut f = Matrix3::identity();
    f[(0, 2)] = -delta.d_avg * s;
    f[(1, 2)] = delta.d_avg * c;
    f
}

/// Advances the mean by the odometry increment; `P <- F P F' + Q`.
pub fn predict(state: &FusedState, delta: &OdometryDelta, noise: &ProcessNoise) -> FusedState {
    let pose = state.pose();
    let f = motion_jacobian(&pose, delta);
    FusedState {
        mean: integrate_pose(&pose, delta).to_vector(),
        covariance: symmetrize(&(f * state.covariance * f.transpose() + noise.q)),
    }
}

/// Wrapped residual `y - H x` and its covariance `S = H P H' + R`.
pub fn innovation(state: &FusedState, y: &Pose2D, model: &MeasurementModel) -> (Vector3<f64>, Matrix3<f64>) {
    let h = model.h;
    let s = symmetrize(&(h * state.covariance * h.transpose() + model.r));
    let mut residual = y.to_vector() - h * state.mean;
    residual[2] = normalize_angle(residual[2]);
    (residual, s)
}

/// Squared Mahalanobis distance of a measurement from the prediction.
pub fn mahalanobis_squared(state: &FusedState, y: &Pose2D, model: &MeasurementModel) -> Result<f64, FusionError> {
    let (residual, s) = innovation(state, y, model);
    let chol = s.cholesky().ok_or(FusionError::DegenerateInnovation)?;
    Ok(residual.dot(&chol.solve(&residual)))
}

/// Kalman update with a pose measurement. The heading residual is wrapped
/// before the gain is applied; the covariance uses the Joseph form.
pub fn update(state: &FusedState, y: &Pose2D, model: &MeasurementModel) -> Result<FusedState, FusionError> {
    let h = model.h;
    let p = state.covariance;
    let (residual, s) = innovation(state, y, model);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(FusionError::DegenerateInnovation);
    }
    let s_inv = s.cholesky().map(|c| c.inverse()).ok_or(FusionError::DegenerateInnovation)?;
    let k = p * h.transpose() * s_inv;
    let mut mean = state.mean + k * residual;
    mean[2] = normalize_angle(mean[2]);
    let a = Matrix3::identity() - k * h;
    let covariance = symmetrize(&(a * p * a.transpose() + k * model.r * k.transpose()));
    Ok(FusedState { mean, covariance })
}

/// Prediction, then an update when a scan-derived pose is available.
pub fn step_fused(
    state: &FusedState,
    delta: &OdometryDelta,
    scan_pose: Option<&Pose2D>,
    model: &MeasurementModel,
    noise: &ProcessNoise,
) -> Result<FusedState, FusionError> {
    let predicted = predict(state, delta, noise);
    match scan_pose {
        Some(y) => update(&predicted, y, model),
        None => Ok(predicted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    #[test]
    fn zero_delta_zero_noise_is_identity() {
        let s = FusedState::new(&Pose2D::new(1.0, 2.0, 0.3), diag(0.1, 0.2, 0.3));
        let out = predict(&s, &OdometryDelta::default(), &ProcessNoise::diagonal(Vector3::zeros()));
        assert_eq!(out, s);
    }

    #[test]
    fn straight_jacobian() {
        let delta = OdometryDelta::from_motion(0.5, 0.0, 0.3);
        let f = motion_jacobian(&Pose2D::identity(), &delta);
        let mut expected = Matrix3::identity();
        expected[(1, 2)] = 0.5;
        assert!((f - expected).amax() < 1e-15);
    }

    #[test]
    fn scalar_gain_halfway() {
        let s = FusedState::new(&Pose2D::new(1.0, 0.0, 0.0), diag(1.0, 1.0, 1.0));
        let model = MeasurementModel::pose(Vector3::new(1.0, 1.0, 1.0));
        let out = update(&s, &Pose2D::new(2.0, 0.0, 0.0), &model).unwrap();
        assert!((out.mean[0] - 1.5).abs() < 1e-12);
        assert!((out.covariance[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn heading_residual_wraps() {
        let s = FusedState::new(&Pose2D::new(0.0, 0.0, -3.1), diag(1.0, 1.0, 1.0));
        let model = MeasurementModel::pose(Vector3::new(1.0, 1.0, 1.0));
        let out = update(&s, &Pose2D::new(0.0, 0.0, 3.1), &model).unwrap();
        // halfway along the short arc through pi
        let expected = normalize_angle(-3.1 - 0.5 * (2.0 * std::f64::consts::PI - 6.2));
        assert!((out.mean[2] - expected).abs() < 1e-12, "{}", out.mean[2]);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let s = FusedState::new(&Pose2D::identity(), Matrix3::zeros());
        let model = MeasurementModel { h: Matrix3::identity(), r: Matrix3::zeros() };
        assert_eq!(update(&s, &Pose2D::identity(), &model), Err(FusionError::DegenerateInnovation));
    }

    #[test]
    fn model_validation() {
        assert!(MeasurementModel::pose(Vector3::new(1.0, 1.0, 1.0)).validate().is_ok());
        assert!(MeasurementModel::pose(Vector3::new(1.0, 0.0, 1.0)).validate().is_err());
        assert!(ProcessNoise::diagonal(Vector3::zeros()).validate().is_ok());
        assert!(ProcessNoise::diagonal(Vector3::new(0.0, -1.0, 0.0)).validate().is_err());
    }
}
