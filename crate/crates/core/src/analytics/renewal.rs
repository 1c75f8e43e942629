//! Renewal functions `U*(x) = int_0^inf P(-X_t <= x) dt` of negative
//! subordinators.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{talbot, DEFAULT_NODES};
use crate::models::{LevyModel, ModelSpec};
use crate::special::{exp_integral_e1, gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RenewalMethod {
    ClosedForm,
    LaplaceInversion,
    RenewalEquation,
}

/// Agreement between the primary table and an independent route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub method: RenewalMethod,
    pub max_rel_diff: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub method: RenewalMethod,
    pub cross_check: Option<CrossCheck>,
}

impl RenewalTable {
    /// Piecewise-linear interpolation, clamped to the end values.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g < x);
        if i == 0 {
            return self.values[0];
        }
        if i == self.grid.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (x - x0) / (x1 - x0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }
}

pub(crate) fn require_subordinator(model: &LevyModel, op: &'static str) -> Result<()> {
    match model.spec {
        ModelSpec::StableSubordinatorNeg { .. } | ModelSpec::GammaSubordinatorNeg { .. } => Ok(()),
        _ => Err(Error::Unsupported {
            op,
            family: model.family_name(),
        }),
    }
}

/// Laplace exponent of `-X` on the complex right half-plane (principal branches).
fn complex_exponent(model: &LevyModel, s: Complex64) -> Complex64 {
    match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => s.powf(alpha),
        ModelSpec::GammaSubordinatorNeg { shape, rate } => {
            (Complex64::new(1.0, 0.0) + s / rate).ln() * shape
        }
        _ => unreachable!("checked by require_subordinator"),
    }
}

/// `U*(x)` by Talbot inversion of `1 / (s phi(s))`.
pub fn renewal_by_inversion(model: &LevyModel, x: f64) -> Result<f64> {
    require_subordinator(model, "renewal_by_inversion")?;
    if !(x > 0.0) {
        return Err(Error::domain("renewal_by_inversion", x, "x must be > 0"));
    }
    Ok(talbot(
        |s| 1.0 / (s * complex_exponent(model, s)),
        x,
        DEFAULT_NODES,
    ))
}

/// Renewal density `u*(x)` (Talbot inversion of `1 / phi(s)`, or the closed
/// form `x^{alpha-1} / Gamma(alpha)` for the stable subordinator).
pub fn renewal_density(model: &LevyModel, x: f64) -> Result<f64> {
    require_subordinator(model, "renewal_density")?;
    if !(x > 0.0) {
        return Err(Error::domain("renewal_density", x, "x must be > 0"));
    }
    match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => Ok(x.powf(alpha - 1.0) / gamma(alpha)),
        _ => Ok(talbot(
            |s| 1.0 / complex_exponent(model, s),
            x,
            DEFAULT_NODES,
        )),
    }
}

/// `U*(x)` at a single point by the family's primary method.
pub fn renewal_value(model: &LevyModel, x: f64) -> Result<f64> {
    require_subordinator(model, "renewal_value")?;
    if !(x > 0.0) {
        return Err(Error::domain("renewal_value", x, "x must be > 0"));
    }
    match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => Ok(x.powf(alpha) / gamma(1.0 + alpha)),
        _ => renewal_by_inversion(model, x),
    }
}

/// `int_0^y pi_bar(t) dt`, the integrated Lévy tail.
fn integrated_tail(model: &LevyModel, y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => Ok(y.powf(1.0 - alpha) / gamma(2.0 - alpha)),
        ModelSpec::GammaSubordinatorNeg { shape, rate } => {
            Ok(shape * (y * exp_integral_e1(rate * y)? + (1.0 - (-rate * y).exp()) / rate))
        }
        _ => unreachable!("checked by require_subordinator"),
    }
}

/// Solve `int_0^x U*(x - y) pi_bar(y) dy = x` on a uniform grid of `n`
/// cells over `(0, x_max]`, with `U*` piecewise constant (cell midpoints)
/// and the tail integrated exactly over each cell.
///
/// The returned table lives on the cell midpoints.
pub fn renewal_equation_table(model: &LevyModel, x_max: f64, n: usize) -> Result<RenewalTable> {
    require_subordinator(model, "renewal_equation_table")?;
    if !(x_max > 0.0) || n == 0 {
        return Err(Error::domain(
            "renewal_equation_table",
            x_max,
            "need x_max > 0 and n > 0",
        ));
    }
    let h = x_max / n as f64;
    let mut cum = Vec::with_capacity(n + 1);
    for j in 0..=n {
        cum.push(integrated_tail(model, j as f64 * h)?);
    }
    let weights: Vec<f64> = cum.windows(2).map(|w| w[1] - w[0]).collect();
    let mut u = vec![0.0; n];
    for i in 0..n {
        // equation for x = (i + 1) h
        let mut acc = 0.0;
        for j in 1..=i {
            acc += u[i - j] * weights[j];
        }
        u[i] = ((i + 1) as f64 * h - acc) / weights[0];
    }
    let grid = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
    Ok(RenewalTable {
        grid,
        values: u,
        method: RenewalMethod::RenewalEquation,
        cross_check: None,
    })
}

/// Cells used by the renewal-equation cross-check.
pub const CROSS_CHECK_CELLS: usize = 1000;

/// Renewal function on `grid` (increasing, positive points).
///
/// The stable subordinator uses the closed form `x^alpha / Gamma(1 + alpha)`
/// cross-checked against Talbot inversion; the Gamma subordinator uses
/// Talbot inversion cross-checked against the renewal equation on
/// [`CROSS_CHECK_CELLS`] cells.
pub fn renewal_function(model: &LevyModel, grid: &[f64]) -> Result<RenewalTable> {
    require_subordinator(model, "renewal_function")?;
    if grid.is_empty() || grid.iter().any(|&x| !(x > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Configuration(
            "renewal grid must be non-empty, positive and strictly increasing".into(),
        ));
    }
    let (values, method): (Vec<f64>, RenewalMethod) = match model.spec {
        ModelSpec::StableSubordinatorNeg { .. } => (
            grid.iter()
                .map(|&x| renewal_value(model, x))
                .collect::<Result<_>>()?,
            RenewalMethod::ClosedForm,
        ),
        _ => (
            grid.iter()
                .map(|&x| renewal_by_inversion(model, x))
                .collect::<Result<_>>()?,
            RenewalMethod::LaplaceInversion,
        ),
    };
    if let Some(i) =
        (1..values.len()).find(|&i| values[i] < values[i - 1] || !values[i].is_finite())
    {
        return Err(Error::numerical(
            "renewal_function",
            format!(
                "non-monotone output: U*({}) = {} < U*({}) = {}",
                grid[i],
                values[i],
                grid[i - 1],
                values[i - 1]
            ),
        ));
    }
    let cross_check = Some(match method {
        RenewalMethod::ClosedForm => {
            let mut worst: f64 = 0.0;
            for (&x, &v) in grid.iter().zip(&values).step_by((grid.len() / 50).max(1)) {
                let alt = renewal_by_inversion(model, x)?;
                worst = worst.max(((alt - v) / v).abs());
            }
            CrossCheck {
                method: RenewalMethod::LaplaceInversion,
                max_rel_diff: worst,
                x_max: *grid.last().unwrap(),
            }
        }
        _ => cross_check_renewal_equation(model, grid, &values)?,
    });
    Ok(RenewalTable {
        grid: grid.to_vec(),
        values,
        method,
        cross_check,
    })
}

fn cross_check_renewal_equation(
    model: &LevyModel,
    grid: &[f64],
    values: &[f64],
) -> Result<CrossCheck> {
    let x_max = grid.last().unwrap().min(10.0);
    let table = renewal_equation_table(model, x_max, CROSS_CHECK_CELLS)?;
    // compare away from the first few cells where the scheme is least accurate
    let x_min = table.grid[10];
    let mut worst: f64 = 0.0;
    for (&x, &v) in grid.iter().zip(values) {
        if x < x_min || x > *table.grid.last().unwrap() {
            continue;
        }
        worst = worst.max(((table.eval(x) - v) / v).abs());
    }
    Ok(CrossCheck {
        method: RenewalMethod::RenewalEquation,
        max_rel_diff: worst,
        x_max,
    })
}

/// Log-spaced grid on `[lo, hi]` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}
