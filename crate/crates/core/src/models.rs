//! Parametric Lévy families, their Lévy-measure tails, Laplace exponents,
//! jump samplers and statically declared qualitative properties.
//!
//! Stable laws use the Zolotarev S1 parameterization with scale `c`:
//! `E exp(i t X_1) = exp(-c^a |t|^a (1 - i beta sgn(t) tan(pi a / 2)))` for
//! `a != 1`, and the symmetric Cauchy law with scale `c` for `a = 1`. The
//! skewness `beta` is recovered from the negativity parameter
//! `rho_bar = P(X_1 < 0)`. The Lévy density is `c_plus x^{-1-a}` on `x > 0`
//! and `c_minus |x|^{-1-a}` on `x < 0`. For `a = 2` the law is `N(0, 2 c^2)`.
//!
//! The negative stable subordinator family is normalized so that
//! `E exp(lambda X_1) = exp(-lambda^a)`, i.e. its tail is
//! `x^{-a} / Gamma(1 - a)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{exp_integral_e1, gamma};

/// Long-run behaviour of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LongRun {
    DriftsPlus,
    DriftsMinus,
    Oscillates,
}

/// Qualitative properties declared per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PropertyFlags {
    pub creeps_down: bool,
    /// 0 is regular for `(-inf, 0)`.
    pub zero_regular_down: bool,
    pub long_run: LongRun,
    pub is_neg_subordinator: bool,
    pub has_neg_jumps: bool,
    /// `pi(-inf, 0) < inf`.
    pub finite_neg_activity: bool,
    /// Downward ladder height process has finite mean.
    pub down_ladder_finite_mean: bool,
}

/// Exponentially distributed jumps in both directions.
///
/// Upward jumps arrive at rate `rate_up` with sizes `Exp(mu_up)` (mean
/// `1/mu_up`); downward jumps likewise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpJumps {
    pub rate_up: f64,
    pub mu_up: f64,
    pub rate_down: f64,
    pub mu_down: f64,
}

impl ExpJumps {
    pub fn symmetric(rate: f64, mu: f64) -> Self {
        ExpJumps {
            rate_up: rate,
            mu_up: mu,
            rate_down: rate,
            mu_down: mu,
        }
    }

    fn validate(&self) -> Result<()> {
        check_nonneg("rate_up", self.rate_up)?;
        check_nonneg("rate_down", self.rate_down)?;
        check_pos("mu_up", self.mu_up)?;
        check_pos("mu_down", self.mu_down)?;
        Ok(())
    }

    fn mean_rate(&self) -> f64 {
        self.rate_up / self.mu_up - self.rate_down / self.mu_down
    }
}

/// Family tag plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    #[serde(rename = "compound-poisson")]
    CompoundPoissonDrift { drift: f64, jumps: ExpJumps },
    Stable {
        alpha: f64,
        rho_bar: f64,
        scale: f64,
    },
    #[serde(rename = "stable-subordinator")]
    StableSubordinatorNeg { alpha: f64 },
    #[serde(rename = "gamma-subordinator")]
    GammaSubordinatorNeg { shape: f64, rate: f64 },
    #[serde(rename = "brownian-cp")]
    BrownianCompoundPoisson {
        sigma: f64,
        drift: f64,
        jumps: ExpJumps,
    },
}

impl ModelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::CompoundPoissonDrift { .. } => "compound-poisson",
            ModelSpec::Stable { .. } => "stable",
            ModelSpec::StableSubordinatorNeg { .. } => "stable-subordinator",
            ModelSpec::GammaSubordinatorNeg { .. } => "gamma-subordinator",
            ModelSpec::BrownianCompoundPoisson { .. } => "brownian-cp",
        }
    }
}

/// Lévy measure restricted to the supported shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum JumpMeasure {
    None,
    Exponential(ExpJumps),
    /// Density `c_plus x^{-1-alpha}` on `x > 0`, `c_minus |x|^{-1-alpha}` on `x < 0`.
    Stable {
        alpha: f64,
        c_plus: f64,
        c_minus: f64,
    },
    /// Negative jumps only, density `a x^{-1} e^{-b x}` for sizes `x`.
    GammaNeg {
        a: f64,
        b: f64,
    },
}

/// Jump part above a truncation level together with the Gaussian and drift
/// terms that stand in for the small jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedJumps {
    pub rate_up: f64,
    pub rate_down: f64,
    /// Drift added to compensate removed small jumps (and, for `alpha > 1`,
    /// the compensator of the large jumps).
    pub drift: f64,
    /// Variance rate of the Gaussian slab standing in for the small jumps.
    pub slab_variance: f64,
}

/// An immutable, validated Lévy model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyModel {
    pub spec: ModelSpec,
    pub flags: PropertyFlags,
    #[serde(skip)]
    pub(crate) measure: JumpMeasure,
    #[serde(skip)]
    pub(crate) drift: f64,
    #[serde(skip)]
    pub(crate) sigma: f64,
    /// S1 skewness for the stable family.
    #[serde(skip)]
    pub(crate) beta: f64,
}

fn check_pos(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, v, "must be finite and > 0"))
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, v, "must be finite and >= 0"))
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, v, "must be finite"))
    }
}

const RHO_EPS: f64 = 1e-12;

/// S1 skewness `beta` with `P(X_1 < 0) = rho_bar`, for `alpha != 1`.
pub fn stable_beta(alpha: f64, rho_bar: f64) -> f64 {
    let rho = 1.0 - rho_bar;
    let beta = (PI * alpha * (rho - 0.5)).tan() / (PI * alpha / 2.0).tan();
    beta.clamp(-1.0, 1.0)
}

/// Build a model, validating parameters and filling in the property flags.
pub fn make_model(spec: ModelSpec) -> Result<LevyModel> {
    match spec {
        ModelSpec::CompoundPoissonDrift { drift, jumps } => {
            check_finite("drift", drift)?;
            jumps.validate()?;
            if drift == 0.0 && jumps.rate_up == 0.0 && jumps.rate_down == 0.0 {
                return Err(Error::param(
                    "drift",
                    drift,
                    "degenerate model: no drift and no jumps",
                ));
            }
            let flags = finite_activity_flags(0.0, drift, &jumps);
            Ok(LevyModel {
                spec,
                flags,
                measure: JumpMeasure::Exponential(jumps),
                drift,
                sigma: 0.0,
                beta: 0.0,
            })
        }
        ModelSpec::BrownianCompoundPoisson {
            sigma,
            drift,
            jumps,
        } => {
            check_nonneg("sigma", sigma)?;
            check_finite("drift", drift)?;
            jumps.validate()?;
            if sigma == 0.0 && drift == 0.0 && jumps.rate_up == 0.0 && jumps.rate_down == 0.0 {
                return Err(Error::param(
                    "sigma",
                    sigma,
                    "degenerate model: no diffusion, drift or jumps",
                ));
            }
            let flags = finite_activity_flags(sigma, drift, &jumps);
            Ok(LevyModel {
                spec,
                flags,
                measure: JumpMeasure::Exponential(jumps),
                drift,
                sigma,
                beta: 0.0,
            })
        }
        ModelSpec::Stable {
            alpha,
            rho_bar,
            scale,
        } => make_stable(alpha, rho_bar, scale),
        ModelSpec::StableSubordinatorNeg { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::param(
                    "alpha",
                    alpha,
                    "stable subordinator index must lie in (0, 1)",
                ));
            }
            Ok(LevyModel {
                spec,
                flags: neg_subordinator_flags(),
                measure: JumpMeasure::Stable {
                    alpha,
                    c_plus: 0.0,
                    c_minus: alpha / gamma(1.0 - alpha),
                },
                drift: 0.0,
                sigma: 0.0,
                beta: -1.0,
            })
        }
        ModelSpec::GammaSubordinatorNeg { shape, rate } => {
            check_pos("shape", shape)?;
            check_pos("rate", rate)?;
            Ok(LevyModel {
                spec,
                flags: neg_subordinator_flags(),
                measure: JumpMeasure::GammaNeg { a: shape, b: rate },
                drift: 0.0,
                sigma: 0.0,
                beta: 0.0,
            })
        }
    }
}

fn neg_subordinator_flags() -> PropertyFlags {
    PropertyFlags {
        creeps_down: false,
        zero_regular_down: true,
        long_run: LongRun::DriftsMinus,
        is_neg_subordinator: true,
        has_neg_jumps: true,
        finite_neg_activity: false,
        down_ladder_finite_mean: false,
    }
}

fn finite_activity_flags(sigma: f64, drift: f64, jumps: &ExpJumps) -> PropertyFlags {
    let mean = drift + jumps.mean_rate();
    let long_run = if mean > 0.0 {
        LongRun::DriftsPlus
    } else if mean < 0.0 {
        LongRun::DriftsMinus
    } else {
        LongRun::Oscillates
    };
    let continuous_down = sigma > 0.0 || drift < 0.0;
    PropertyFlags {
        creeps_down: continuous_down,
        zero_regular_down: continuous_down,
        long_run,
        is_neg_subordinator: sigma == 0.0 && drift <= 0.0 && jumps.rate_up == 0.0,
        has_neg_jumps: jumps.rate_down > 0.0,
        finite_neg_activity: true,
        // Exponential jumps have all moments, so the descending ladder
        // height is integrable whenever the process does not drift up.
        down_ladder_finite_mean: long_run != LongRun::DriftsPlus,
    }
}

fn make_stable(alpha: f64, rho_bar: f64, scale: f64) -> Result<LevyModel> {
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
    check_pos("scale", scale)?;
    if alpha * rho_bar > 1.0 + RHO_EPS || alpha * (1.0 - rho_bar) > 1.0 + RHO_EPS {
        return Err(Error::param(
            "rho_bar",
            rho_bar,
            format!("not admissible for alpha = {alpha}: need alpha*rho_bar <= 1 and alpha*(1-rho_bar) <= 1"),
        ));
    }
    if alpha == 1.0 && (rho_bar - 0.5).abs() > RHO_EPS {
        return Err(Error::param(
            "rho_bar",
            rho_bar,
            "alpha = 1 is supported only in the symmetric case",
        ));
    }

    let (beta, c_plus, c_minus) = if alpha == 2.0 {
        (0.0, 0.0, 0.0)
    } else if alpha == 1.0 {
        (0.0, scale / PI, scale / PI)
    } else {
        let beta = if alpha < 1.0 && rho_bar <= RHO_EPS {
            1.0
        } else if alpha < 1.0 && rho_bar >= 1.0 - RHO_EPS {
            -1.0
        } else if alpha > 1.0 && (alpha * rho_bar - 1.0).abs() <= RHO_EPS {
            1.0
        } else if alpha > 1.0 && (alpha * (1.0 - rho_bar) - 1.0).abs() <= RHO_EPS {
            -1.0
        } else {
            stable_beta(alpha, rho_bar)
        };
        let total = scale.powf(alpha) / (-gamma(-alpha) * (PI * alpha / 2.0).cos());
        (beta, total * (1.0 + beta) / 2.0, total * (1.0 - beta) / 2.0)
    };

    let has_neg_jumps = alpha < 2.0 && c_minus > 0.0;
    let long_run = if alpha < 1.0 && rho_bar >= 1.0 - RHO_EPS {
        LongRun::DriftsMinus
    } else if alpha < 1.0 && rho_bar <= RHO_EPS {
        LongRun::DriftsPlus
    } else {
        LongRun::Oscillates
    };
    let flags = PropertyFlags {
        creeps_down: alpha == 2.0,
        zero_regular_down: rho_bar > RHO_EPS,
        long_run,
        is_neg_subordinator: alpha < 1.0 && rho_bar >= 1.0 - RHO_EPS,
        has_neg_jumps,
        finite_neg_activity: !has_neg_jumps,
        down_ladder_finite_mean: alpha == 2.0,
    };
    let sigma = if alpha == 2.0 {
        scale * std::f64::consts::SQRT_2
    } else {
        0.0
    };
    let measure = if alpha == 2.0 {
        JumpMeasure::None
    } else {
        JumpMeasure::Stable {
            alpha,
            c_plus,
            c_minus,
        }
    };
    Ok(LevyModel {
        spec: ModelSpec::Stable {
            alpha,
            rho_bar,
            scale,
        },
        flags,
        measure,
        drift: 0.0,
        sigma,
        beta,
    })
}

impl LevyModel {
    pub fn family_name(&self) -> &'static str {
        self.spec.family_name()
    }

    /// Gaussian volatility of the continuous part.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Linear drift of the continuous part (before any truncation compensation).
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn is_finite_activity(&self) -> bool {
        matches!(
            self.measure,
            JumpMeasure::None | JumpMeasure::Exponential(_)
        )
    }

    /// Lower tail of the Lévy measure, `pi((-inf, -x])`, for `x > 0`.
    pub fn tail_neg(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || x.is_nan() {
            return Err(Error::domain("tail_neg", x, "level must be > 0"));
        }
        Ok(match self.measure {
            JumpMeasure::None => 0.0,
            JumpMeasure::Exponential(j) => j.rate_down * (-j.mu_down * x).exp(),
            JumpMeasure::Stable { alpha, c_minus, .. } => c_minus * x.powf(-alpha) / alpha,
            JumpMeasure::GammaNeg { a, b } => a * exp_integral_e1(b * x)?,
        })
    }

    /// Density of the Lévy measure at `-y`, `y > 0`.
    pub fn density_neg(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || y.is_nan() {
            return Err(Error::domain("density_neg", y, "level must be > 0"));
        }
        Ok(match self.measure {
            JumpMeasure::None => 0.0,
            JumpMeasure::Exponential(j) => j.rate_down * j.mu_down * (-j.mu_down * y).exp(),
            JumpMeasure::Stable { alpha, c_minus, .. } => c_minus * y.powf(-1.0 - alpha),
            JumpMeasure::GammaNeg { a, b } => a * (-b * y).exp() / y,
        })
    }

    /// `pi((-inf, 0))`, infinite for infinite-activity families.
    pub fn total_neg_rate(&self) -> f64 {
        match self.measure {
            JumpMeasure::None => 0.0,
            JumpMeasure::Exponential(j) => j.rate_down,
            JumpMeasure::Stable { c_minus: 0.0, .. } => 0.0,
            JumpMeasure::Stable { .. } | JumpMeasure::GammaNeg { .. } => f64::INFINITY,
        }
    }

    /// Laplace exponent `phi` of `-X` for negative-subordinator families:
    /// `E exp(lambda X_1) = exp(-phi(lambda))`.
    pub fn laplace_exponent(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::domain(
                "laplace_exponent",
                lambda,
                "lambda must be >= 0",
            ));
        }
        match self.spec {
            ModelSpec::StableSubordinatorNeg { alpha } => Ok(lambda.powf(alpha)),
            ModelSpec::GammaSubordinatorNeg { shape, rate } => Ok(shape * (lambda / rate).ln_1p()),
            _ => Err(Error::Unsupported {
                op: "laplace_exponent",
                family: self.family_name(),
            }),
        }
    }

    /// Rates of jumps of absolute size at least `delta`, plus the drift and
    /// Gaussian slab replacing the smaller ones.
    pub fn truncate(&self, delta: f64) -> Result<TruncatedJumps> {
        match self.measure {
            JumpMeasure::None => Ok(TruncatedJumps {
                rate_up: 0.0,
                rate_down: 0.0,
                drift: 0.0,
                slab_variance: 0.0,
            }),
            JumpMeasure::Exponential(j) => Ok(TruncatedJumps {
                rate_up: j.rate_up,
                rate_down: j.rate_down,
                drift: 0.0,
                slab_variance: 0.0,
            }),
            _ if !(delta > 0.0) => Err(Error::Configuration(format!(
                "truncation_delta must be > 0 for the infinite-activity {} family",
                self.family_name()
            ))),
            JumpMeasure::Stable {
                alpha,
                c_plus,
                c_minus,
            } => {
                let rate_up = c_plus * delta.powf(-alpha) / alpha;
                let rate_down = c_minus * delta.powf(-alpha) / alpha;
                let asym = c_plus - c_minus;
                let (drift, slab_variance) = if alpha < 1.0 {
                    // mean of the discarded jumps
                    (asym * delta.powf(1.0 - alpha) / (1.0 - alpha), 0.0)
                } else {
                    let var = (c_plus + c_minus) * delta.powf(2.0 - alpha) / (2.0 - alpha);
                    let drift = if alpha > 1.0 {
                        // compensator of the retained large jumps
                        -asym * delta.powf(1.0 - alpha) / (alpha - 1.0)
                    } else {
                        0.0
                    };
                    (drift, var)
                };
                Ok(TruncatedJumps {
                    rate_up,
                    rate_down,
                    drift,
                    slab_variance,
                })
            }
            JumpMeasure::GammaNeg { a, b } => Ok(TruncatedJumps {
                rate_up: 0.0,
                rate_down: a * exp_integral_e1(b * delta)?,
                drift: -a * (1.0 - (-b * delta).exp()) / b,
                slab_variance: 0.0,
            }),
        }
    }

    /// Sample the size (a negative number) of a downward jump, conditioned
    /// on `|size| >= delta` for infinite-activity families. `delta` is
    /// ignored by finite-activity families.
    pub fn sample_jump_neg<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
        match self.measure {
            JumpMeasure::None => 0.0,
            JumpMeasure::Exponential(j) => -sample_exp(j.mu_down, rng),
            JumpMeasure::Stable { alpha, .. } => -sample_pareto(delta, alpha, rng),
            JumpMeasure::GammaNeg { b, .. } => -sample_gamma_levy(delta, b, rng),
        }
    }

    /// Upward counterpart of [`LevyModel::sample_jump_neg`]; returns a positive size.
    pub fn sample_jump_pos<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
        match self.measure {
            JumpMeasure::Exponential(j) => sample_exp(j.mu_up, rng),
            JumpMeasure::Stable { alpha, .. } => sample_pareto(delta, alpha, rng),
            JumpMeasure::None | JumpMeasure::GammaNeg { .. } => 0.0,
        }
    }

    /// Exact increment of a stable model over `dt` (S1 parameterization).
    pub fn sample_stable_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        match self.spec {
            ModelSpec::Stable { alpha, scale, .. } => {
                Ok(scale * dt.powf(1.0 / alpha) * sample_stable_s1(alpha, self.beta, rng))
            }
            ModelSpec::StableSubordinatorNeg { alpha } => {
                Ok(-dt.powf(1.0 / alpha) * sample_positive_stable(alpha, rng))
            }
            _ => Err(Error::Unsupported {
                op: "sample_stable_increment",
                family: self.family_name(),
            }),
        }
    }
}

/// Stable increment for `(alpha, rho_bar)` with unit scale over `dt`.
pub fn sample_stable_increment<R: Rng + ?Sized>(
    alpha: f64,
    rho_bar: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    let model = make_model(ModelSpec::Stable {
        alpha,
        rho_bar,
        scale: 1.0,
    })?;
    if !(dt > 0.0) {
        return Err(Error::domain(
            "sample_stable_increment",
            dt,
            "dt must be > 0",
        ));
    }
    model.sample_stable_increment(dt, rng)
}

pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn sample_exp<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -open01(rng).ln() / rate
}

fn sample_pareto<R: Rng + ?Sized>(delta: f64, alpha: f64, rng: &mut R) -> f64 {
    delta * open01(rng).powf(-1.0 / alpha)
}

/// Jump size from the density proportional to `x^{-1} e^{-b x}` on `[delta, inf)`.
///
/// Envelope: `x^{-1}` on `[delta, 1/b]` and `b e^{-b x}` beyond `1/b`.
fn sample_gamma_levy<R: Rng + ?Sized>(delta: f64, b: f64, rng: &mut R) -> f64 {
    let knee = 1.0 / b;
    if delta >= knee {
        loop {
            let x = delta + sample_exp(b, rng);
            if rng.random::<f64>() * x <= delta {
                return x;
            }
        }
    }
    let mass_inner = (knee / delta).ln();
    let mass_outer = (-1.0f64).exp();
    let p_inner = mass_inner / (mass_inner + mass_outer);
    loop {
        if rng.random::<f64>() < p_inner {
            let x = delta * (mass_inner * rng.random::<f64>()).exp();
            if rng.random::<f64>() <= (-b * x).exp() {
                return x;
            }
        } else {
            let x = knee + sample_exp(b, rng);
            if rng.random::<f64>() * b * x <= 1.0 {
                return x;
            }
        }
    }
}

/// Chambers–Mallows–Stuck sampler for the standard S1 law, `alpha != 1`
/// or symmetric `alpha = 1`.
pub(crate) fn sample_stable_s1<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let v = PI * (open01(rng) - 0.5);
    let w = sample_exp(1.0, rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let t = beta * (PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let arg = alpha * (v + b);
    s * arg.sin() / v.cos().powf(1.0 / alpha) * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Kanter's representation of the positive stable law with
/// `E exp(-lambda S) = exp(-lambda^alpha)`, `alpha in (0, 1)`.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * open01(rng);
    let w = sample_exp(1.0, rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}
