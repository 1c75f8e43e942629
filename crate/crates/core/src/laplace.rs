//! Numerical inversion of Laplace transforms by the fixed Talbot contour
//! (Abate–Valkó).

use std::f64::consts::PI;

use num_complex::Complex64;

/// Number of contour nodes. In double precision the error bottoms out
/// around 1e-10 for transforms analytic off the negative real axis.
pub const DEFAULT_NODES: usize = 24;

/// Invert `transform` at time `t > 0`.
///
/// The contour is `s(theta) = r theta (cot theta + i)`, `r = 2M / (5t)`,
/// which encloses the negative real axis and the origin.
pub fn talbot<F>(transform: F, t: f64, nodes: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut acc = 0.5 * (transform(Complex64::new(r, 0.0)) * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    acc * r / m
}
