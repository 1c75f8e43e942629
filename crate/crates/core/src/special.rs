//! Special functions: digamma, the exponential integral E1, and thin
//! wrappers over `libm` for the Gamma function and the normal CDF.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// Below this threshold the recurrence psi(z) = psi(z + 1) - 1/z is applied
// before switching to the asymptotic expansion.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

// B_{2k} / (2k) for k = 1..=7.
const ASYMPTOTIC_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma function `psi(z) = Gamma'(z) / Gamma(z)`.
///
/// Positive arguments are shifted upward by the recurrence until
/// `z >= 10`, then evaluated with the asymptotic series
/// `ln z - 1/(2z) - sum B_{2k} / (2k z^{2k})`. Negative non-integer
/// arguments go through the reflection formula first.
pub fn digamma(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain("digamma", z, "argument must be finite"));
    }
    if z <= 0.0 && z == z.floor() {
        return Err(Error::domain("digamma", z, "pole at non-positive integer"));
    }
    if z < 0.0 {
        // psi(z) = psi(1 - z) - pi cot(pi z)
        let reflected = digamma(1.0 - z)?;
        return Ok(reflected - PI / (PI * z).tan());
    }
    Ok(digamma_positive(z))
}

fn digamma_positive(mut z: f64) -> f64 {
    let mut shift = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut series = 0.0;
    let mut power = inv2;
    for c in ASYMPTOTIC_COEFFS {
        series += c * power;
        power *= inv2;
    }
    shift + z.ln() - 0.5 / z - series
}

/// Exponential integral `E1(x) = int_x^inf e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "exp_integral_e1",
            x,
            "argument must be positive",
        ));
    }
    if x > 700.0 {
        return Ok(0.0);
    }
    if x <= 1.0 {
        // -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let contrib = term / kf;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return Ok(-EULER_GAMMA - x.ln() - sum);
    }
    // Modified Lentz on the continued fraction e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    Ok(h * (-x).exp())
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
