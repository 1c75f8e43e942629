//! Analytic and numerical evaluation of the absorption criteria.

mod classify;
mod renewal;

pub use classify::{classify, classify_stable_params, ClassificationVerdict, Rule, Verdict};
pub use renewal::{
    log_grid, renewal_by_inversion, renewal_density, renewal_equation_table, renewal_function,
    renewal_value, CrossCheck, RenewalMethod, RenewalTable, CROSS_CHECK_CELLS,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{LevyModel, ModelSpec};
use crate::special::digamma;

/// Grid density used for the H-inf supremum.
pub const HINF_POINTS_PER_DECADE: usize = 200;
pub const HINF_GRID_LO: f64 = 1e-6;
pub const HINF_GRID_HI: f64 = 1e6;

/// Where the supremum of `U*(y) pi_bar(-y)` is approached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArgmaxRegion {
    /// `y -> 0+`.
    Zero,
    Interior,
    /// `y -> inf`.
    Infinity,
    /// The product is constant in `y`.
    Everywhere,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HinfSupremum {
    /// Supremum including the analytic end-point limits.
    pub sup_value: f64,
    /// Maximum over the log grid alone.
    pub grid_sup: f64,
    pub grid_argmax: f64,
    pub argmax_region: ArgmaxRegion,
    pub limit_at_zero: Option<f64>,
    pub limit_at_infinity: Option<f64>,
    /// `(y, U*(y) pi_bar(-y))` on the grid.
    pub profile: Vec<(f64, f64)>,
}

impl HinfSupremum {
    /// Largest product value over grid points `y >= y_min`.
    pub fn sup_above(&self, y_min: f64) -> f64 {
        self.profile
            .iter()
            .filter(|(y, _)| *y >= y_min)
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sup_{y>0} U*(y) pi_bar(-y)` for negative subordinators.
pub fn hinf_supremum(model: &LevyModel) -> Result<HinfSupremum> {
    renewal::require_subordinator(model, "hinf_supremum")?;
    let grid = log_grid(HINF_GRID_LO, HINF_GRID_HI, HINF_POINTS_PER_DECADE);
    let table = renewal_function(model, &grid)?;
    let mut profile = Vec::with_capacity(grid.len());
    for (&y, &u) in grid.iter().zip(&table.values) {
        profile.push((y, u * model.tail_neg(y)?));
    }
    let (grid_argmax, grid_sup) =
        profile
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, p| {
                if p.1 > best.1 {
                    p
                } else {
                    best
                }
            });

    let (limit_at_zero, limit_at_infinity) = match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => {
            let c = (std::f64::consts::PI * alpha).sin() / (std::f64::consts::PI * alpha);
            (Some(c), Some(c))
        }
        // slowly varying tail at 0 (index 0) and exponential decay at infinity
        ModelSpec::GammaSubordinatorNeg { .. } => (Some(1.0), Some(0.0)),
        _ => (None, None),
    };
    let mut sup_value = grid_sup;
    let mut argmax_region = ArgmaxRegion::Interior;
    if let Some(l0) = limit_at_zero {
        if l0 >= sup_value {
            sup_value = l0;
            argmax_region = ArgmaxRegion::Zero;
        }
    }
    if let Some(li) = limit_at_infinity {
        if li > sup_value {
            sup_value = li;
            argmax_region = ArgmaxRegion::Infinity;
        }
    }
    let spread = profile
        .iter()
        .map(|p| (p.1 - grid_sup).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-9 * grid_sup.abs().max(1.0) && limit_at_zero == limit_at_infinity {
        argmax_region = ArgmaxRegion::Everywhere;
    } else if argmax_region == ArgmaxRegion::Interior && grid_argmax == grid[0] {
        argmax_region = ArgmaxRegion::Zero;
    } else if argmax_region == ArgmaxRegion::Interior && grid_argmax == *grid.last().unwrap() {
        argmax_region = ArgmaxRegion::Infinity;
    }
    Ok(HinfSupremum {
        sup_value,
        grid_sup,
        grid_argmax,
        argmax_region,
        limit_at_zero,
        limit_at_infinity,
        profile,
    })
}

/// `P(undershoot-to-overshoot gap > x) = U*(x) pi_bar(-x)` at the first
/// passage below `-x` of a negative subordinator.
pub fn overshoot_probability(model: &LevyModel, x: f64) -> Result<f64> {
    renewal::require_subordinator(model, "overshoot_probability")?;
    if !(x > 0.0) {
        return Err(Error::domain("overshoot_probability", x, "x must be > 0"));
    }
    let p = renewal_value(model, x)? * model.tail_neg(x)?;
    if !(p >= 0.0) || p > 1.0 + 1e-9 {
        return Err(Error::numerical(
            "overshoot_probability",
            format!("U*(x) pi_bar(-x) = {p} is not a probability at x = {x}"),
        ));
    }
    Ok(p.min(1.0))
}

/// Sign-carrying bracket of the mean of the Lamperti exponent of the
/// resurrected stable process:
/// `B = (psi(1 - a r) - psi(1)) - (psi(a r) - psi(a))`, `r = rho_bar`.
///
/// Absorption holds iff `B < 0`.
pub fn stable_mean_xi(alpha: f64, rho_bar: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param(
            "alpha",
            alpha,
            "stable index must lie in (0, 2]",
        ));
    }
    if !(0.0..=1.0).contains(&rho_bar) {
        return Err(Error::param("rho_bar", rho_bar, "must lie in [0, 1]"));
    }
    let z = alpha * rho_bar;
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::Degenerate {
            op: "stable_mean_xi",
            reason: format!(
                "alpha*rho_bar = {z} is on the boundary {{0, 1}}; use the no-negative-jumps or subordinator rules"
            ),
        });
    }
    Ok((digamma(1.0 - z)? - digamma(1.0)?) - (digamma(z)? - digamma(alpha)?))
}
