//! Conversions between ordinary and angular frequencies.

use std::f64::consts::TAU;

/// MHz to rad/ns.
#[inline]
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e-3
}

/// GHz to rad/ns.
#[inline]
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// rad/ns to MHz.
#[inline]
pub fn angular_to_mhz(w: f64) -> f64 {
    w / TAU * 1e3
}

/// Microseconds to a rate in 1/ns. `None` means lossless.
#[inline]
pub fn rate_from_us(time_us: Option<f64>) -> f64 {
    match time_us {
        Some(t) => 1.0 / (t * 1e3),
        None => 0.0,
    }
}
