//! Numerical quadrature on top of the double-exponential rule of the
//! `quadrature` crate.

/// `int_a^b f`, splitting `[a, b]` at the given interior points.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, interior: &[f64], tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for &p in interior.iter().filter(|&&p| p > a && p < b) {
        total += quadrature::integrate(&f, lo, p, tol).integral;
        lo = p;
    }
    total + quadrature::integrate(&f, lo, b, tol).integral
}

/// `int_a^b f` by the double-exponential rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    quadrature::integrate(f, a, b, tol).integral
}

/// Power used by [`integrate_singular_ends`].
const END_POWER: i32 = 4;

/// `int_a^b f` for integrands with integrable singularities at either end
/// (`|y - a|^{-p}` with `p < 1`, logarithms). The interval is split at its
/// midpoint and each half is mapped by `y = end +- h u^4`, which flattens
/// the singularity before the double-exponential rule sees it.
pub fn integrate_singular_ends<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let p = END_POWER as f64;
    let left = quadrature::integrate(
        |u: f64| {
            let h = m - a;
            p * h * u.powi(END_POWER - 1) * f(a + h * u.powi(END_POWER))
        },
        0.0,
        1.0,
        tol,
    )
    .integral;
    let right = quadrature::integrate(
        |u: f64| {
            let h = b - m;
            p * h * u.powi(END_POWER - 1) * f(b - h * u.powi(END_POWER))
        },
        0.0,
        1.0,
        tol,
    )
    .integral;
    left + right
}

/// `int_a^inf f` via `x = a + u / (1 - u)`, with the first unit handled directly.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let head = quadrature::integrate(&f, a, a + 1.0, tol).integral;
    let tail = quadrature::integrate(
        |u: f64| {
            let v = 1.0 - u;
            f(a + 1.0 + u / v) / (v * v)
        },
        0.0,
        1.0,
        tol,
    )
    .integral;
    head + tail
}
