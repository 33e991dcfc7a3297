//! Float helpers routed through `libm` so the crate builds without `std`.

pub(crate) use libm::{atan2, cos, exp, fabs, log, sin, sqrt, tan, tanh};

pub(crate) const TAU: f64 = core::f64::consts::TAU;
pub(crate) const PI: f64 = core::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Euclidean norm of a 2-vector.
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// `ln(1 + e^x)` computed without overflow for large `|x|`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        exp(x)
    } else {
        log(1.0 + exp(x))
    }
}
