use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use navsim::fusion::{innovation, predict, step_fused, update, FusedState, MeasurementModel, ProcessNoise};
use navsim::geometry::angle_diff;
use navsim::odometry::{integrate_pose, OdometryDelta};
use navsim::Pose2D;

fn state(x: f64, y: f64, th: f64, p: [f64; 3]) -> FusedState {
    FusedState::new(&Pose2D::new(x, y, th), Matrix3::from_diagonal(&Vector3::from(p)))
}

fn var() -> impl Strategy<Value = f64> {
    1e-4f64..1.0
}

proptest! {
    #[test]
    fn posterior_lies_between_prior_and_measurement(
        x in -5.0f64..5.0, y in -5.0f64..5.0, th in -PI..PI,
        mx in -5.0f64..5.0, my in -5.0f64..5.0, mth in -PI..PI,
        p in [var(), var(), var()], r in [var(), var(), var()],
    ) {
        let prior = state(x, y, th, p);
        let post = update(&prior, &Pose2D::new(mx, my, mth), &MeasurementModel::pose(Vector3::from(r))).unwrap();
        let between = |a: f64, b: f64, v: f64| v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12;
        prop_assert!(between(x, mx, post.mean[0]));
        prop_assert!(between(y, my, post.mean[1]));
        // along the short way round from prior to measurement heading
        let span = angle_diff(mth, th);
        let moved = angle_diff(post.mean[2], th);
        prop_assert!(between(0.0, span, moved));
        for i in 0..3 {
            prop_assert!(post.covariance[(i, i)] <= prior.covariance[(i, i)] + 1e-15);
        }
    }

    #[test]
    fn prediction_with_noise_grows_the_trace(
        th in -PI..PI, d in -1.0f64..1.0, dth in -1.0f64..1.0,
        p in [var(), var(), var()], q in [var(), var(), var()],
    ) {
        let s = state(0.0, 0.0, th, p);
        let next = predict(&s, &OdometryDelta::from_motion(d, dth, 0.5), &ProcessNoise::diagonal(Vector3::from(q)));
        prop_assert!(next.trace() > s.trace());
        let pose = integrate_pose(&s.pose(), &OdometryDelta::from_motion(d, dth, 0.5));
        prop_assert_eq!(next.pose(), pose);
    }
}

#[test]
fn scalar_example_on_the_x_axis() {
    let prior = state(1.0, 0.0, 0.0, [1.0, 1.0, 1.0]);
    let post =
        update(&prior, &Pose2D::new(2.0, 0.0, 0.0), &MeasurementModel::pose(Vector3::new(1.0, 1.0, 1.0))).unwrap();
    assert!((post.mean[0] - 1.5).abs() < 1e-12);
    assert!((post.covariance[(0, 0)] - 0.5).abs() < 1e-12);
}

#[test]
fn residual_wraps_across_pi() {
    let prior = state(0.0, 0.0, -3.1, [0.1, 0.1, 0.1]);
    let (residual, _) = innovation(&prior, &Pose2D::new(0.0, 0.0, 3.1), &MeasurementModel::pose(Vector3::repeat(0.1)));
    assert!((residual[2] - (6.2 - 2.0 * PI)).abs() < 1e-12, "{}", residual[2]);
}

#[test]
fn without_measurements_fusion_is_odometry() {
    let q = ProcessNoise::diagonal(Vector3::repeat(1e-4));
    let model = MeasurementModel::pose(Vector3::repeat(0.01));
    let mut s = state(1.0, 2.0, 0.5, [0.01, 0.01, 0.01]);
    let mut odo = s.pose();
    for k in 0..500 {
        let d = OdometryDelta::from_motion(0.05, 0.02 * (k as f64 * 0.1).sin(), 0.5);
        s = step_fused(&s, &d, None, &model, &q).unwrap();
        odo = integrate_pose(&odo, &d);
        assert_eq!(s.pose(), odo);
    }
}

#[test]
fn perfect_measurements_keep_the_estimate_on_truth() {
    let r = Vector3::repeat(1e-6);
    let model = MeasurementModel::pose(r);
    let q = ProcessNoise::diagonal(Vector3::repeat(1e-4));
    let mut s = state(0.0, 0.0, 0.0, [0.01, 0.01, 0.01]);
    let mut truth = Pose2D::identity();
    for k in 0..300 {
        let d = OdometryDelta::from_motion(0.1, 0.05, 0.5);
        // odometry that over-reads distance by 10 percent
        let biased = OdometryDelta::from_motion(0.11, 0.05, 0.5);
        truth = integrate_pose(&truth, &d);
        s = step_fused(&s, &biased, Some(&truth), &model, &q).unwrap();
        let bound = 10.0 * r[0].sqrt();
        assert!((s.pose().position() - truth.position()).norm() <= bound * 2f64.sqrt(), "step {k}");
        assert!(angle_diff(s.pose().theta, truth.theta).abs() <= bound);
    }
}

#[test]
fn covariance_trace_is_a_sawtooth_with_sparse_updates() {
    let model = MeasurementModel::pose(Vector3::repeat(0.01));
    let q = ProcessNoise::diagonal(Vector3::repeat(1e-3));
    let mut s = state(0.0, 0.0, 0.0, [0.01, 0.01, 0.01]);
    let mut prev = s.trace();
    for k in 1..=50 {
        let d = OdometryDelta::from_motion(0.1, 0.0, 0.5);
        let y = (k % 10 == 0).then(|| integrate_pose(&s.pose(), &d));
        s = step_fused(&s, &d, y.as_ref(), &model, &q).unwrap();
        if k % 10 == 0 {
            assert!(s.trace() < prev, "step {k}");
        } else {
            assert!(s.trace() > prev, "step {k}");
        }
        prev = s.trace();
    }
}
