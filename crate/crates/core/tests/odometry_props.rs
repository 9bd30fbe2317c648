use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use navsim::odometry::{
    integrate_motion, integrate_pose, ticks_to_distance, wheel_delta, EncoderReading, OdometryDelta, WheelGeometry,
};
use navsim::rng::{stream_rng, Stream};
use navsim::sim::{step_truth, synth_encoders, ControlInput, NoiseModel};
use navsim::Pose2D;

fn geometry() -> impl Strategy<Value = WheelGeometry> {
    (0.01f64..0.5, 0.1f64..1.5, 1u32..5000).prop_map(|(r, w, n)| WheelGeometry::new(r, w, n).unwrap())
}

/// Endpoint error of one midpoint step against the exact arc.
fn one_step_error(radius: f64, dtheta: f64) -> f64 {
    let p = integrate_motion(&Pose2D::identity(), radius * dtheta, dtheta);
    let exact = (radius * dtheta.sin(), radius * (1.0 - dtheta.cos()));
    (p.x - exact.0).hypot(p.y - exact.1)
}

#[test]
fn halving_the_step_shrinks_the_step_error_quadratically() {
    for &dtheta in &[0.4, 0.2, 0.1, 0.05] {
        let ratio = one_step_error(1.0, dtheta) / one_step_error(1.0, dtheta / 2.0);
        assert!(ratio >= 3.9, "dtheta {dtheta}: ratio {ratio}");
    }
}

#[test]
fn noiseless_encoders_replay_truth_within_a_tick_per_step() {
    let geom = WheelGeometry::new(0.05, 0.4, 2048).unwrap();
    let tick = geom.distance_per_tick();
    let mut rng = stream_rng(3, Stream::Encoders, 0);
    let mut truth = Pose2D::new(1.0, 2.0, 0.3);
    for k in 0..200 {
        let u = ControlInput::new(0.3 + 0.1 * (k as f64 * 0.1).sin(), 0.4 * (k as f64 * 0.05).cos(), 0.1);
        let next = step_truth(&truth, &u);
        let reading = synth_encoders(&truth, &next, &geom, &NoiseModel::noiseless(), &mut rng);
        let odo = integrate_pose(&truth, &wheel_delta(&geom, &reading));
        assert!((odo.position() - next.position()).norm() <= tick, "step {k}");
        truth = next;
    }
}

proptest! {
    #[test]
    fn distance_is_linear_in_ticks(g in geometry(), n in -10_000i64..10_000, k in -50i64..50) {
        let one = ticks_to_distance(&g, n);
        let many = ticks_to_distance(&g, k * n);
        prop_assert!((many - k as f64 * one).abs() <= 1e-12 * many.abs().max(1e-300));
    }

    #[test]
    fn wheel_delta_fields_are_consistent(g in geometry(), l in -5000i64..5000, r in -5000i64..5000) {
        let d = wheel_delta(&g, &EncoderReading { left_ticks: l, right_ticks: r });
        prop_assert_eq!(d.d_avg, (d.d_left + d.d_right) / 2.0);
        prop_assert_eq!(d.d_theta, (d.d_right - d.d_left) / g.track_width);
        prop_assert_eq!(d.d_left, ticks_to_distance(&g, l));
    }

    #[test]
    fn straight_steps_add_up(x in -5.0f64..5.0, y in -5.0f64..5.0, th in -PI..PI, d in -0.5f64..0.5, n in 1usize..100) {
        let start = Pose2D::new(x, y, th);
        let step = OdometryDelta::from_motion(d, 0.0, 0.5);
        let mut p = start;
        for _ in 0..n {
            p = integrate_pose(&p, &step);
        }
        let once = integrate_pose(&start, &OdometryDelta::from_motion(n as f64 * d, 0.0, 0.5));
        prop_assert!((p.position() - once.position()).norm() <= 1e-9);
        prop_assert_eq!(p.theta, start.theta);
    }

    #[test]
    fn integration_commutes_with_a_frame_rotation(
        x in -5.0f64..5.0, y in -5.0f64..5.0, th in -PI..PI,
        d in -0.5f64..0.5, dth in -1.0f64..1.0, rot in -PI..PI,
    ) {
        let frame = Pose2D::new(0.0, 0.0, rot);
        let delta = OdometryDelta::from_motion(d, dth, 0.5);
        let a = frame.compose(&integrate_pose(&Pose2D::new(x, y, th), &delta));
        let b = integrate_pose(&frame.compose(&Pose2D::new(x, y, th)), &delta);
        prop_assert!((a.position() - b.position()).norm() <= 1e-9);
        prop_assert!(navsim::geometry::angle_diff(a.theta, b.theta).abs() <= 1e-9);
    }

    #[test]
    fn integrated_heading_stays_normalized(th in -PI..PI, dth in -20.0f64..20.0) {
        let p = integrate_motion(&Pose2D::new(0.0, 0.0, th), 0.1, dth);
        prop_assert!(p.theta > -PI && p.theta <= PI);
    }
}

#[test]
fn one_revolution_of_both_wheels_spins_nothing() {
    let g = WheelGeometry::new(0.05, 0.5, 1000).unwrap();
    let d = wheel_delta(&g, &EncoderReading { left_ticks: 1000, right_ticks: 1000 });
    assert_abs_diff_eq!(d.d_avg, 2.0 * PI * 0.05, epsilon = 1e-15);
    assert_eq!(d.d_theta, 0.0);
}
