//! Small special-function helpers.

use std::f64::consts::PI;

/// Bessel function of the first kind, integer order, from
/// `J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt`.
///
/// The integrand is smooth and periodic, so the trapezoid rule converges
/// geometrically once the node count exceeds `|x| + n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = (2.0 * (x.abs() + n.unsigned_abs() as f64) + 64.0).ceil() as usize;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for k in 1..m {
        s += f(k as f64 * h);
    }
    s * h / PI
}

/// The bracket `<t> = 2 + t`.
#[inline]
pub fn bracket(t: f64) -> f64 {
    2.0 + t
}

/// `ln <t>`.
#[inline]
pub fn log_bracket(t: f64) -> f64 {
    bracket(t).ln()
}

/// Two-sided 97.5% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
