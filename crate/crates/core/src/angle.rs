use std::f64::consts::{PI, TAU};

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t += TAU;
    }
    t
}
