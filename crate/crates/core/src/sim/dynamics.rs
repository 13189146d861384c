//! Per-tick free-object kinematics shared by the simulator and the predictor.

use crate::geom::{Pose6D, Vec3};
use crate::scalar::Scalar;

use super::types::ObjectState;

/// Advance a sliding object by one tick under Coulomb deceleration `mu * g`.
///
/// Within the tick the deceleration is constant, so travel is the exact
/// constant-deceleration distance; an object that would reverse stops
/// instead. With `mu * g == 0` this is `p + v * dt`.
#[inline]
pub fn advance_free_motion<T: Scalar>(
    position: Vec3<T>,
    velocity: Vec3<T>,
    mu: T,
    gravity: T,
    dt: T,
) -> (Vec3<T>, Vec3<T>) {
    let decel = mu * gravity;
    if decel == T::zero() {
        return (position + velocity * dt, velocity);
    }
    let speed = velocity.norm();
    if speed == T::zero() {
        return (position, velocity);
    }
    let dv = decel * dt;
    if dv >= speed {
        let travel = speed * speed / (T::two() * decel);
        (position + velocity * (travel / speed), Vec3::zero())
    } else {
        let next = speed - dv;
        let travel = (speed + next) * T::half() * dt;
        (position + velocity * (travel / speed), velocity * (next / speed))
    }
}

/// Number of whole ticks covering `horizon` seconds (rounded up).
pub fn horizon_ticks<T: Scalar>(horizon: T, dt: T) -> u64 {
    debug_assert!(horizon >= T::zero());
    // Tolerate representation error so that e.g. 0.24 / 0.04 maps to 6, not 7.
    let ratio = horizon / dt;
    let snapped = ratio.round();
    let ticks = if (ratio - snapped).abs() <= T::lit(1e-9) * snapped.max(T::one()) {
        snapped
    } else {
        ratio.ceil()
    };
    ticks.to_u64().unwrap_or(0)
}

/// Extrapolate a free object's pose `horizon` seconds ahead.
///
/// Integrates the same per-tick law as the simulator over
/// `ceil(horizon / dt)` ticks, so `predict_pose(o, k * dt)` reproduces `k`
/// simulator steps of an untouched object exactly.
pub fn predict_pose<T: Scalar>(object: &ObjectState<T>, horizon: T, gravity: T, dt: T) -> Pose6D<T> {
    let ticks = horizon_ticks(horizon, dt);
    let mut pos = object.pose.position;
    let mut vel = object.linear_velocity;
    let mut orientation = object.pose.orientation;
    for _ in 0..ticks {
        let (p, v) = advance_free_motion(pos, vel, object.friction, gravity, dt);
        pos = p;
        vel = v;
        orientation = orientation.integrate(object.angular_velocity, dt);
    }
    Pose6D::new(pos, orientation)
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 9.81;
    const DT: f64 = 1.0 / 25.0;

    // Scalar reference for a single axis, written independently of the vector
    // code: explicit stop-time reasoning.
    fn scalar_tick(x: f64, v: f64, mu: f64) -> (f64, f64) {
        let a = mu * G;
        if a == 0.0 {
            return (x + v * DT, v);
        }
        let t_stop = v / a;
        if t_stop <= DT {
            (x + 0.5 * v * t_stop, 0.0)
        } else {
            (x + v * DT - 0.5 * a * DT * DT, v - a * DT)
        }
    }

    #[test]
    fn frictionless_tick_moves_v_dt() {
        let (p, v) = advance_free_motion(Vec3::zero(), Vec3::new(0.5, 0.0, 0.0), 0.0, G, DT);
        assert_eq!(p.x, 0.02);
        assert_eq!(v.x, 0.5);
    }

    #[test]
    fn coulomb_stop_within_one_tick() {
        let (p, v) = advance_free_motion(Vec3::zero(), Vec3::new(0.1, 0.0, 0.0), 1.0, G, DT);
        let expected_speed = f64::max(0.0, 0.1 - 9.81 * 0.04);
        assert_eq!(v.norm(), expected_speed);
        let (xr, vr) = scalar_tick(0.0, 0.1, 1.0);
        assert_eq!(vr, 0.0);
        assert!((p.x - xr).abs() < 1e-15);
    }

    #[test]
    fn partial_deceleration_matches_scalar_reference() {
        let mut pos = Vec3::zero();
        let mut vel = Vec3::new(0.6, 0.0, 0.0);
        let (mut xr, mut vr) = (0.0, 0.6);
        for _ in 0..40 {
            (pos, vel) = advance_free_motion(pos, vel, 0.05, G, DT);
            (xr, vr) = scalar_tick(xr, vr, 0.05);
            assert!((pos.x - xr).abs() < 1e-12);
            assert!((vel.x - vr).abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_quantization_rounds_up() {
        assert_eq!(horizon_ticks(0.23, DT), 6);
        assert_eq!(horizon_ticks(0.24, DT), 6);
        assert_eq!(horizon_ticks(0.0, DT), 0);
        assert_eq!(horizon_ticks(0.041, DT), 2);
        assert_eq!(horizon_ticks(0.23f32, 0.04f32), 6);
    }
}
