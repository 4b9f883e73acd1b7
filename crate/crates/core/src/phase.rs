//! Phase arithmetic on the circle.

use std::f64::consts::{PI, TAU};

/// Reduces an angle into `[0, 2π)`.
pub fn wrap(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle into `(-π, π]`.
pub fn wrap_signed(angle: f64) -> f64 {
    let r = wrap(angle);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Shortest distance between two angles, in `[0, π]`.
pub fn distance(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}
