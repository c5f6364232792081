//! Bessel functions of the first kind for integer order.
//!
//! Small arguments use the power series. Larger arguments use the trapezoidal
//! rule on Bessel's integral over a full period, which converges geometrically
//! once the node count exceeds `|x| + |n|`.

use std::f64::consts::{PI, TAU};

use crate::{Error, Result};

/// Location of the first maximum of `J1`.
pub const J1_FIRST_MAX_ARG: f64 = 1.841_183_781_340_659_3;

/// Value of `J1` at its first maximum.
pub const J1_FIRST_MAX: f64 = 0.581_865_224_281_596_4;

const SERIES_LIMIT: f64 = 8.0;

/// `J_n(x)` for any integer order.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x <= SERIES_LIMIT {
        series(n as u32, x)
    } else {
        periodic_quadrature(n, x)
    }
}

#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j(0, x)
}

#[inline]
pub fn bessel_j1(x: f64) -> f64 {
    bessel_j(1, x)
}

#[inline]
pub fn bessel_j2(x: f64) -> f64 {
    bessel_j(2, x)
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // leading term (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= -q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) || k > 200 {
            break;
        }
    }
    sum
}

fn periodic_quadrature(n: i32, x: f64) -> f64 {
    let m = 2 * ((x.abs() as usize) + n.unsigned_abs() as usize) + 64;
    let h = TAU / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        let tau = k as f64 * h;
        acc += (n as f64 * tau - x * tau.sin()).cos();
    }
    acc / m as f64
}

/// `d/dx J1(x) = (J0(x) - J2(x)) / 2`.
pub fn bessel_j1_prime(x: f64) -> f64 {
    0.5 * (bessel_j0(x) - bessel_j2(x))
}

/// Inverse of `J1` on its first monotone branch `[0, J1_FIRST_MAX_ARG]`.
pub fn bessel_j1_inverse(y: f64) -> Result<f64> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::invalid(format!("J1 inverse needs a finite non-negative value, got {y}")));
    }
    if y > J1_FIRST_MAX {
        if y - J1_FIRST_MAX < 1e-12 {
            return Ok(J1_FIRST_MAX_ARG);
        }
        return Err(Error::Unreachable(format!(
            "J1 value {y} exceeds the first-branch maximum {J1_FIRST_MAX}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, J1_FIRST_MAX_ARG);
    // Reversion of the first three series terms.
    let y2 = y * y;
    let mut x = (y * (2.0 + y2 * (1.0 + y2 * 4.0 / 3.0))).min(0.95 * J1_FIRST_MAX_ARG);
    for _ in 0..100 {
        let j1 = bessel_j1(x);
        let f = j1 - y;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = bessel_j0(x) - j1 / x;
        let mut next = x - f / d;
        if !(next > lo && next < hi) || d.abs() < 1e-6 {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x.max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Bessel's integral evaluated with composite Simpson over `[0, pi]`.
/// Used as an independent check on [`bessel_j`].
pub fn bessel_j_integral(n: i32, x: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = PI / m as f64;
    let f = |tau: f64| (n as f64 * tau - x * tau.sin()).cos();
    let mut acc = f(0.0) + f(PI);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0 / PI
}
