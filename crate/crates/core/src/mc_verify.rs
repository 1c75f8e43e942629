//! Monte Carlo checks of the distributional identities and bounds of the
//! resurrected process.
//!
//! Every replica uses its own substream keyed by `(seed, role, ordinal)`
//! and results are reduced in ordinal order, so each check is reproducible
//! bit for bit whatever the worker count.

use serde::Serialize;

use crate::analytics::{classify, hinf_supremum, renewal_value, Verdict};
use crate::error::{Error, Result};
use crate::exec::{domain, map_replicas, substream};
use crate::models::{LevyModel, LongRun, ModelSpec};
use crate::path::{run_first_passage, trapezoid, CrossingKind, Driver, SimParams};
use crate::report::CheckBlock;
use crate::resurrection::{
    kernel_step_closed_form, kernel_step_pathwise, resurrection_times, simulate_lifetime,
    AbsorptionPolicy, KernelMode, KernelStep, TraceStatus,
};
use crate::stats::{
    bonferroni, erlang_cdf, ks_one_sample, ks_two_sample, EstimateWithCI, KSReport, LEVEL_MULTIPLE,
    LEVEL_PRIMARY,
};

/// Feynman–Kac weights above this are reported as unstable.
pub const WEIGHT_OVERFLOW: f64 = 1e12;

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Test functions with `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFn {
    /// `f = 0`.
    Zero,
    /// `min(y, 1)`.
    MinOne,
    /// `1 - e^{-y}`.
    OneMinusExp,
    /// `y 1{y <= m}`.
    Truncated { m: f64 },
}

impl TestFn {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            TestFn::Zero => 0.0,
            TestFn::MinOne => y.min(1.0),
            TestFn::OneMinusExp => -(-y).exp_m1(),
            TestFn::Truncated { m } => {
                if y <= m {
                    y
                } else {
                    0.0
                }
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            TestFn::Zero => "zero",
            TestFn::MinOne => "f1",
            TestFn::OneMinusExp => "f2",
            TestFn::Truncated { .. } => "f3",
        }
    }

    /// Parse `zero`, `f1`, `f2` or `f3:<m>`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(TestFn::Zero),
            "f1" => Some(TestFn::MinOne),
            "f2" => Some(TestFn::OneMinusExp),
            _ => {
                let m = s.strip_prefix("f3:")?.parse::<f64>().ok()?;
                (m > 0.0).then_some(TestFn::Truncated { m })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Feynman–Kac

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeynmanKacReport {
    pub x: f64,
    pub t: f64,
    pub f: TestFn,
    /// `E_x[f(Z_t); t < zeta]` from resurrected paths.
    pub lhs: EstimateWithCI,
    /// `E_x[f(X_t) exp(int_0^t pi_bar(-X_s) ds); t < tau]` from killed paths.
    pub rhs: Option<EstimateWithCI>,
    pub max_weight: f64,
    /// Set when a weight exceeded [`WEIGHT_OVERFLOW`].
    pub instability: Option<String>,
    pub compatible: bool,
}

impl FeynmanKacReport {
    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "feynman-kac",
            model.spec,
            serde_json::json!({"x": self.x, "t": self.t, "f": self.f.id()}),
            self.lhs.n,
            seed,
            self,
            self.compatible,
        )
    }
}

/// Two-sided check of the Feynman–Kac representation of the resurrected
/// semigroup. Restricted to finite negative activity, where the weight
/// `exp(int pi_bar)` has finite rate.
pub fn check_feynman_kac(
    model: &LevyModel,
    x: f64,
    t: f64,
    f: TestFn,
    n: usize,
    params: &SimParams,
    seed: u64,
) -> Result<FeynmanKacReport> {
    params.validate(model)?;
    if !model.flags.finite_neg_activity {
        return Err(Error::precondition(
            "check_feynman_kac",
            "finite_neg_activity is false: the path weight has infinite rate near 0",
        ));
    }
    if !(x > 0.0) {
        return Err(Error::domain("check_feynman_kac", x, "x must be > 0"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", t, "must be finite and >= 0"));
    }
    if n == 0 {
        return Err(Error::param("n", 0.0, "must be >= 1"));
    }
    if f == TestFn::Zero || t == 0.0 {
        let v = f.eval(x);
        return Ok(FeynmanKacReport {
            x,
            t,
            f,
            lhs: EstimateWithCI::exact(v, n),
            rhs: Some(EstimateWithCI::exact(v, n)),
            max_weight: 1.0,
            instability: None,
            compatible: true,
        });
    }
    let policy = AbsorptionPolicy::default();
    let lhs_samples = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::FK_LHS, i as u64);
        let tr = resurrection_times(model, x, t, params, &policy, &mut rng)?;
        Ok(match tr.status {
            TraceStatus::SurvivedHorizon => (f.eval(tr.terminal), false),
            TraceStatus::BudgetExhausted => (0.0, true),
            _ => (0.0, false),
        })
    }))?;
    let censored = lhs_samples.iter().filter(|s| s.1).count();
    let lhs_vals: Vec<f64> = lhs_samples.iter().map(|s| s.0).collect();
    let lhs = EstimateWithCI::from_samples(&lhs_vals, censored);

    let driver = Driver::new(model, params.effective_delta(x), params.grid_dt, false)?;
    let rhs_samples = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::FK_RHS, i as u64);
        let mut exponent = 0.0;
        let mut err = None;
        let fp = run_first_passage(&driver, x, 0.0, t, &mut rng, |seg| {
            // a creeping segment ends exactly at 0, where the tail takes
            // its right limit, the total downward jump rate
            exponent += trapezoid(seg, |v| {
                if v <= 0.0 {
                    return model.total_neg_rate();
                }
                match model.tail_neg(v) {
                    Ok(r) => r,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            });
        });
        if let Some(e) = err {
            return Err(e);
        }
        let w = exponent.exp();
        if w < 1.0 {
            return Err(Error::numerical(
                "check_feynman_kac",
                format!("path weight {w} < 1: the exponent must be nonnegative"),
            ));
        }
        Ok(if fp.kind == CrossingKind::NotHit {
            (f.eval(fp.pre) * w, w)
        } else {
            (0.0, w)
        })
    }))?;
    let max_weight = rhs_samples.iter().map(|s| s.1).fold(1.0, f64::max);
    let (rhs, instability) = if max_weight > WEIGHT_OVERFLOW {
        (
            None,
            Some(format!(
                "path weight {max_weight:e} exceeds {WEIGHT_OVERFLOW:e}; estimator unstable"
            )),
        )
    } else {
        let vals: Vec<f64> = rhs_samples.iter().map(|s| s.0).collect();
        (Some(EstimateWithCI::from_samples(&vals, 0)), None)
    };
    let compatible = rhs.as_ref().is_some_and(|r| r.overlaps(&lhs));
    Ok(FeynmanKacReport {
        x,
        t,
        f,
        lhs,
        rhs,
        max_weight,
        instability,
        compatible,
    })
}

// ---------------------------------------------------------------------------
// Exp(1) law of the integrated tail

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialLawReport {
    pub x: f64,
    pub ks: KSReport,
    /// Mean of the integrated tail over the uncensored paths.
    pub mean: EstimateWithCI,
    pub censored: usize,
}

impl ExponentialLawReport {
    pub fn pass(&self) -> bool {
        !self.ks.rejected
    }

    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "exponential-law",
            model.spec,
            serde_json::json!({"x": self.x}),
            self.ks.n,
            seed,
            self,
            self.pass(),
        )
    }
}

/// `int_0^tau pi_bar(-X_t) dt` along one first-passage path, or `None` if
/// the budget ran out.
fn integrated_tail_to_passage<R: rand::Rng + ?Sized>(
    driver: &Driver<'_>,
    model: &LevyModel,
    x: f64,
    budget: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let mut acc = 0.0;
    let mut err = None;
    let fp = run_first_passage(driver, x, 0.0, budget, rng, |seg| {
        acc += trapezoid(seg, |v| {
            if v <= 0.0 {
                return 0.0;
            }
            match model.tail_neg(v) {
                Ok(r) => r,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        });
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok((fp.kind != CrossingKind::NotHit).then_some(acc))
}

/// KS test of `int_0^tau pi_bar(-X_t) dt ~ Exp(1)`. Censored paths count
/// as `+inf` (their integral is only bounded below).
pub fn check_exponential_law(
    model: &LevyModel,
    x: f64,
    n: usize,
    params: &SimParams,
    seed: u64,
) -> Result<ExponentialLawReport> {
    params.validate(model)?;
    if model.flags.creeps_down {
        return Err(Error::precondition(
            "check_exponential_law",
            "creeps_down is true",
        ));
    }
    if model.flags.long_run == LongRun::DriftsPlus {
        return Err(Error::precondition(
            "check_exponential_law",
            "long_run is DriftsPlus",
        ));
    }
    if !(x > 0.0) {
        return Err(Error::domain("check_exponential_law", x, "x must be > 0"));
    }
    let driver = Driver::new(model, params.effective_delta(x), params.grid_dt, false)?;
    let budget = params.step_budget();
    let samples = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::PATHS, i as u64);
        integrated_tail_to_passage(&driver, model, x, budget, &mut rng)
    }))?;
    let censored = samples.iter().filter(|s| s.is_none()).count();
    let vals: Vec<f64> = samples.iter().map(|s| s.unwrap_or(f64::INFINITY)).collect();
    let ks = ks_one_sample(&vals, |v| -(-v).exp_m1(), LEVEL_PRIMARY);
    let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = EstimateWithCI::from_samples(&finite, censored);
    Ok(ExponentialLawReport {
        x,
        ks,
        mean,
        censored,
    })
}

// ---------------------------------------------------------------------------
// Stochastic domination of resurrection times

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub x: f64,
    pub n_res: usize,
    pub n_paths: usize,
    pub rate: f64,
    pub horizon: f64,
    /// `sup_t (F_emp(t) - F_Gamma(t))^+` over `t < horizon`.
    pub max_violation: f64,
    /// DKW-style band `2 / sqrt(n_paths)`.
    pub band: f64,
    /// Mean of `tau_{n_res}` over traces that reached it.
    pub mean_tau: EstimateWithCI,
    pub mean_lower_bound: f64,
    /// Traces censored by the horizon before `n_res` resurrections.
    pub horizon_censored: usize,
    pub absorbed: usize,
}

impl DominationReport {
    pub fn pass(&self) -> bool {
        self.max_violation <= self.band
            && self.absorbed == 0
            && self.mean_tau.mean + 3.0 * self.mean_tau.standard_error() >= self.mean_lower_bound
    }

    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "stochastic-domination",
            model.spec,
            serde_json::json!({"x": self.x, "n_res": self.n_res, "horizon": self.horizon}),
            self.n_paths,
            seed,
            self,
            self.pass(),
        )
    }
}

/// Compare the law of the `n_res`-th resurrection time with
/// `Gamma(n_res, pi_bar(0+))`, which it must dominate stochastically.
pub fn check_stochastic_domination(
    model: &LevyModel,
    x: f64,
    n_res: usize,
    n_paths: usize,
    horizon: f64,
    params: &SimParams,
    seed: u64,
) -> Result<DominationReport> {
    let f = &model.flags;
    if !(f.finite_neg_activity && f.has_neg_jumps) {
        return Err(Error::precondition(
            "check_stochastic_domination",
            "needs 0 < pi(-inf, 0) < inf (finite_neg_activity and has_neg_jumps)",
        ));
    }
    if f.creeps_down {
        return Err(Error::precondition(
            "check_stochastic_domination",
            "creeps_down is true",
        ));
    }
    if n_res == 0 || n_paths == 0 {
        return Err(Error::param(
            "n_res",
            n_res as f64,
            "n_res and n_paths must be >= 1",
        ));
    }
    let rate = model.total_neg_rate();
    let policy = AbsorptionPolicy {
        n_max: n_res,
        ..AbsorptionPolicy::default()
    };
    let traces = collect(map_replicas(n_paths, |i| {
        let mut rng = substream(seed, domain::TRACE, i as u64);
        let tr = resurrection_times(model, x, horizon, params, &policy, &mut rng)?;
        let tau = if tr.tau_seq.len() >= n_res {
            tr.tau_seq[n_res - 1]
        } else {
            f64::INFINITY
        };
        Ok((tau, tr.status.is_absorbed()))
    }))?;
    let absorbed = traces.iter().filter(|t| t.1).count();
    let mut taus: Vec<f64> = traces.iter().map(|t| t.0).collect();
    let horizon_censored = taus.iter().filter(|t| !t.is_finite()).count();
    taus.sort_by(f64::total_cmp);
    let nf = n_paths as f64;
    let mut max_violation: f64 = 0.0;
    for (i, &t) in taus.iter().enumerate() {
        if !t.is_finite() || t >= horizon {
            break;
        }
        max_violation = max_violation.max((i + 1) as f64 / nf - erlang_cdf(n_res, rate, t));
    }
    let finite: Vec<f64> = taus.iter().copied().filter(|t| t.is_finite()).collect();
    let mean_tau = EstimateWithCI::from_samples(&finite, horizon_censored);
    Ok(DominationReport {
        x,
        n_res,
        n_paths,
        rate,
        horizon,
        max_violation,
        band: 2.0 / nf.sqrt(),
        mean_tau,
        mean_lower_bound: n_res as f64 / rate,
        horizon_censored,
        absorbed,
    })
}

// ---------------------------------------------------------------------------
// Lifetime

/// Lifetime samples from `start`; `(value, censored, n_resurrections)`.
pub fn lifetime_samples(
    model: &LevyModel,
    start: f64,
    n: usize,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    mode: KernelMode,
    seed: u64,
    stream_offset: u64,
) -> Result<Vec<(f64, bool, usize)>> {
    collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::LIFETIME, stream_offset + i as u64);
        let est = simulate_lifetime(model, start, params, policy, mode, &mut rng)?;
        Ok((
            est.zeta.value(),
            est.zeta.is_censored(),
            est.n_resurrections,
        ))
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeBoundReport {
    pub x: f64,
    pub mode: KernelMode,
    /// Mean of the uncensored lifetimes.
    pub zeta: EstimateWithCI,
    /// `E_x tau` by path simulation.
    pub first_passage: EstimateWithCI,
    /// `U*(x)` (exact `E_x tau` for a negative subordinator).
    pub first_passage_exact: f64,
    /// `sup U* pi_bar`.
    pub hinf: f64,
    /// `U*(x) / (1 - sup U* pi_bar)`.
    pub bound: f64,
}

impl LifetimeBoundReport {
    /// Mean within the bound up to three standard errors, censoring below
    /// 1%, and the first-passage mean within 5% of `U*(x)`.
    pub fn pass(&self) -> bool {
        self.zeta.mean <= self.bound + 3.0 * self.zeta.standard_error()
            && self.zeta.censored_fraction < 0.01
            && (self.first_passage.mean / self.first_passage_exact - 1.0).abs() < 0.05
    }

    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "lifetime-bound",
            model.spec,
            serde_json::json!({"x": self.x, "mode": self.mode}),
            self.zeta.n,
            seed,
            self,
            self.pass(),
        )
    }
}

/// Lifetime mean against `E_x tau / (1 - sup U* pi_bar)` for a negative
/// subordinator in the H-inf regime.
pub fn check_lifetime_bound(
    model: &LevyModel,
    x: f64,
    n: usize,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    mode: KernelMode,
    seed: u64,
) -> Result<LifetimeBoundReport> {
    let h = hinf_supremum(model)?;
    if h.sup_value >= 1.0 {
        return Err(Error::precondition(
            "check_lifetime_bound",
            "sup U* pi_bar >= 1: no finite bound on the mean lifetime",
        ));
    }
    let u = renewal_value(model, x)?;
    let bound = u / (1.0 - h.sup_value);
    let samples = lifetime_samples(model, x, n, params, policy, mode, seed, 0)?;
    let censored = samples.iter().filter(|s| s.1).count();
    let finite: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut zeta = EstimateWithCI::from_samples(&finite, censored);
    zeta.censored_fraction = censored as f64 / n as f64;
    let taus = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::PATHS, i as u64);
        Ok(match kernel_step_pathwise(model, x, params, &mut rng)? {
            KernelStep::Step { tau_inc, .. } => (tau_inc, false),
            KernelStep::Censored { elapsed } => (elapsed, true),
        })
    }))?;
    let tau_censored = taus.iter().filter(|s| s.1).count();
    let tau_vals: Vec<f64> = taus.iter().map(|s| s.0).collect();
    Ok(LifetimeBoundReport {
        x,
        mode,
        zeta,
        first_passage: EstimateWithCI::from_samples(&tau_vals, tau_censored),
        first_passage_exact: u,
        hinf: h.sup_value,
        bound,
    })
}

// ---------------------------------------------------------------------------
// Kernel invariance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceRow {
    pub x: f64,
    /// `E_x e^{-lambda zeta}`.
    pub direct: EstimateWithCI,
    /// `E_x[e^{-lambda tau_1} f(Z(tau_1))]` with `f` estimated on a grid.
    pub one_step: EstimateWithCI,
    pub compatible: bool,
    pub censored_fraction: f64,
    /// Censoring above 5%.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub lambda: f64,
    pub n: usize,
    pub n_inner: usize,
    pub grid_points: usize,
    pub rows: Vec<InvarianceRow>,
    /// The direct estimates decrease with the start level.
    pub monotone: bool,
}

impl InvarianceReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.compatible && !r.inconclusive)
    }

    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.x).collect();
        CheckBlock::new(
            "kernel-invariance",
            model.spec,
            serde_json::json!({"xs": xs, "lambda": self.lambda, "n_inner": self.n_inner}),
            self.n,
            seed,
            self,
            self.pass(),
        )
    }
}

/// Levels per decade of the grid on which the inner function is tabulated.
pub const INVARIANCE_GRID_PER_DECADE: usize = 16;

fn discounted(lifetime: (f64, bool, usize), lambda: f64) -> f64 {
    // a censored lifetime is a lower bound: use the upper bound of e^{-lambda zeta}
    (-lambda * lifetime.0).exp()
}

/// Check `K_lambda f = f` for `f(x) = E_x e^{-lambda zeta}` by nested Monte
/// Carlo, with `n_inner = sqrt(n)` inner lifetimes per grid level.
pub fn check_kernel_invariance(
    model: &LevyModel,
    xs: &[f64],
    n: usize,
    lambda: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    seed: u64,
) -> Result<InvarianceReport> {
    let v = classify(model);
    if v.verdict != Verdict::AbsorbedAS {
        return Err(Error::precondition(
            "check_kernel_invariance",
            "classifier verdict is not AbsorbedAS",
        ));
    }
    if !matches!(
        model.spec,
        ModelSpec::StableSubordinatorNeg { .. } | ModelSpec::GammaSubordinatorNeg { .. }
    ) {
        return Err(Error::precondition(
            "check_kernel_invariance",
            "kernel sampler only available for negative subordinators",
        ));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", lambda, "must be >= 0"));
    }
    if n < 4 {
        return Err(Error::param("n", n as f64, "must be >= 4"));
    }
    let mode = KernelMode::default_for(model);
    let n_inner = (n as f64).sqrt().ceil() as usize;
    let mut rows = Vec::with_capacity(xs.len());
    let mut grid_points = 0;
    for (xi, &x) in xs.iter().enumerate() {
        let offset = (xi as u64) << 40;
        let direct_s = lifetime_samples(model, x, n, params, policy, mode, seed, offset)?;
        let censored_direct = direct_s.iter().filter(|s| s.1).count();
        let direct_vals: Vec<f64> = direct_s.iter().map(|&s| discounted(s, lambda)).collect();
        let direct = EstimateWithCI::from_samples(&direct_vals, censored_direct);

        // outer first steps
        let steps = collect(map_replicas(n, |i| {
            let mut rng = substream(seed, domain::KERNEL, offset + i as u64);
            match mode {
                KernelMode::ClosedForm => {
                    kernel_step_closed_form(model, x, &mut rng).map(|(z, t)| Some((z, t)))
                }
                KernelMode::Pathwise => {
                    Ok(match kernel_step_pathwise(model, x, params, &mut rng)? {
                        KernelStep::Step { next, tau_inc, .. } => Some((next, tau_inc)),
                        KernelStep::Censored { .. } => None,
                    })
                }
            }
        }))?;
        let censored_outer = steps.iter().filter(|s| s.is_none()).count();
        let outer: Vec<(f64, f64)> = steps.into_iter().flatten().collect();

        // log grid of levels covering the first-step positions
        let z_min = outer
            .iter()
            .map(|s| s.0)
            .filter(|&z| z > 0.0)
            .fold(x, f64::min);
        let decades = (x / z_min).log10().max(0.0);
        let cells = ((decades * INVARIANCE_GRID_PER_DECADE as f64).ceil() as usize).max(1);
        let (lo, hi) = (z_min.ln(), x.ln());
        let grid: Vec<f64> = (0..=cells)
            .map(|k| (lo + (hi - lo) * k as f64 / cells as f64).exp())
            .collect();
        grid_points += grid.len();
        let inner = collect(map_replicas(grid.len(), |g| {
            let s = lifetime_samples(
                model,
                grid[g],
                n_inner,
                params,
                policy,
                mode,
                seed ^ 0x5eed_1eaf,
                offset + ((g as u64) << 20),
            )?;
            let censored = s.iter().filter(|v| v.1).count();
            let vals: Vec<f64> = s.iter().map(|&v| discounted(v, lambda)).collect();
            Ok((EstimateWithCI::from_samples(&vals, censored), censored))
        }))?;
        let censored_inner: usize = inner.iter().map(|s| s.1).sum();

        // one_step = sum_g W_g fhat_g
        let mut weights = vec![0.0; grid.len()];
        let mut contrib = Vec::with_capacity(outer.len());
        for &(z, tau) in &outer {
            let disc = (-lambda * tau).exp();
            let (g, c) = if z <= 0.0 || grid.len() == 1 {
                (0, 0.0)
            } else {
                let pos = ((z.ln() - lo) / (hi - lo) * cells as f64).clamp(0.0, cells as f64);
                let g = (pos.floor() as usize).min(cells - 1);
                (g, pos - g as f64)
            };
            let f_z = if z <= 0.0 {
                // crept to zero: the lifetime ends at tau_1
                1.0
            } else if grid.len() == 1 {
                weights[0] += disc;
                inner[0].0.mean
            } else {
                weights[g] += disc * (1.0 - c);
                weights[g + 1] += disc * c;
                (1.0 - c) * inner[g].0.mean + c * inner[g + 1].0.mean
            };
            contrib.push(disc * f_z);
        }
        let mut one_step = EstimateWithCI::from_samples(&contrib, censored_outer);
        let m = outer.len().max(1) as f64;
        let grid_var: f64 = weights
            .iter()
            .zip(&inner)
            .map(|(w, (e, _))| (w / m).powi(2) * e.standard_error().powi(2))
            .sum();
        one_step.half_width_95 = 1.96 * (one_step.standard_error().powi(2) + grid_var).sqrt();
        let total_runs = n + n + grid.len() * n_inner;
        let censored_fraction =
            (censored_direct + censored_outer + censored_inner) as f64 / total_runs as f64;
        let inconclusive = censored_direct as f64 / n as f64 > 0.05
            || censored_outer as f64 / n as f64 > 0.05
            || censored_inner as f64 / (grid.len() * n_inner) as f64 > 0.05;
        rows.push(InvarianceRow {
            x,
            compatible: direct.overlaps(&one_step),
            direct,
            one_step,
            censored_fraction,
            inconclusive,
        });
    }
    let mut sorted: Vec<&InvarianceRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let monotone = sorted
        .windows(2)
        .all(|w| w[1].direct.mean <= w[0].direct.mean);
    Ok(InvarianceReport {
        lambda,
        n,
        n_inner,
        grid_points,
        rows,
        monotone,
    })
}

// ---------------------------------------------------------------------------
// Zero-one probe

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub x: f64,
    pub absorbed_frequency: EstimateWithCI,
    pub budget_exhausted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub horizon: f64,
    pub rows: Vec<ProbeRow>,
    /// Largest difference of frequencies across starts.
    pub spread: f64,
    /// All pairs of intervals intersect.
    pub consistent: bool,
}

impl ProbeReport {
    pub fn block(&self, model: &LevyModel, seed: u64) -> Result<CheckBlock> {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.x).collect();
        let n = self.rows.first().map_or(0, |r| r.absorbed_frequency.n);
        // evidence only: the pass flag records consistency across starts
        CheckBlock::new(
            "zero-one-probe",
            model.spec,
            serde_json::json!({"xs": xs, "horizon": self.horizon}),
            n,
            seed,
            self,
            self.consistent,
        )
    }
}

/// Per-start frequency of absorption within the horizon. No verdict is
/// drawn from it.
pub fn probe_zero_one_conjecture(
    model: &LevyModel,
    xs: &[f64],
    n: usize,
    horizon: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    seed: u64,
) -> Result<ProbeReport> {
    if model.flags.long_run == LongRun::DriftsPlus {
        return Err(Error::precondition(
            "probe_zero_one_conjecture",
            "long_run is DriftsPlus",
        ));
    }
    let mut rows = Vec::with_capacity(xs.len());
    for (xi, &x) in xs.iter().enumerate() {
        let offset = (xi as u64) << 40;
        let out = collect(map_replicas(n, |i| {
            let mut rng = substream(seed, domain::TRACE, offset + i as u64);
            let tr = resurrection_times(model, x, horizon, params, policy, &mut rng)?;
            Ok(tr.status)
        }))?;
        let vals: Vec<f64> = out.iter().map(|s| s.is_absorbed() as u8 as f64).collect();
        let budget_exhausted = out
            .iter()
            .filter(|s| **s == TraceStatus::BudgetExhausted)
            .count();
        rows.push(ProbeRow {
            x,
            absorbed_frequency: EstimateWithCI::from_samples(&vals, budget_exhausted),
            budget_exhausted,
        });
    }
    let freqs: Vec<f64> = rows.iter().map(|r| r.absorbed_frequency.mean).collect();
    let spread = freqs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - freqs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let consistent = rows.iter().enumerate().all(|(i, a)| {
        rows[i + 1..].iter().all(|b| {
            a.absorbed_frequency.overlaps(&b.absorbed_frequency)
                || a.absorbed_frequency.mean == b.absorbed_frequency.mean
        })
    });
    Ok(ProbeReport {
        horizon,
        rows,
        spread: if spread.is_finite() { spread } else { 0.0 },
        consistent,
    })
}

// ---------------------------------------------------------------------------
// Scaling

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPair {
    pub x_i: f64,
    pub x_j: f64,
    pub ks: KSReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub exponent: f64,
    pub level: f64,
    pub pairs: Vec<ScalingPair>,
    pub any_rejected: bool,
    pub censored_fraction: f64,
    /// Censoring above 5%.
    pub inconclusive: bool,
}

impl ScalingReport {
    pub fn pass(&self) -> bool {
        !self.any_rejected && !self.inconclusive
    }

    pub fn block(&self, model: &LevyModel, n: usize, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "scaling",
            model.spec,
            serde_json::json!({"exponent": self.exponent}),
            n,
            seed,
            self,
            self.pass(),
        )
    }
}

/// Index of self-similarity of the lifetime: `zeta` under `P_x` has the law
/// of `x^alpha zeta` under `P_1`.
pub fn stable_index(model: &LevyModel) -> Option<f64> {
    match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } | ModelSpec::Stable { alpha, .. } => Some(alpha),
        _ => None,
    }
}

/// Pairwise two-sample KS on `zeta / x^exponent` across starts, at the
/// Bonferroni-adjusted 1% level. `exponent` defaults to the stable index.
pub fn check_scaling_stable(
    model: &LevyModel,
    xs: &[f64],
    n: usize,
    exponent: Option<f64>,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    seed: u64,
) -> Result<ScalingReport> {
    let alpha = stable_index(model).ok_or_else(|| {
        Error::precondition("check_scaling_stable", "model is not in a stable family")
    })?;
    if classify(model).verdict != Verdict::AbsorbedAS {
        return Err(Error::precondition(
            "check_scaling_stable",
            "classifier verdict is not AbsorbedAS",
        ));
    }
    if xs.len() < 2 {
        return Err(Error::param(
            "xs",
            xs.len() as f64,
            "need at least two starts",
        ));
    }
    let exponent = exponent.unwrap_or(alpha);
    let mode = KernelMode::default_for(model);
    let mut scaled = Vec::with_capacity(xs.len());
    let mut censored = 0;
    for (xi, &x) in xs.iter().enumerate() {
        let s = lifetime_samples(model, x, n, params, policy, mode, seed, (xi as u64) << 40)?;
        censored += s.iter().filter(|v| v.1).count();
        let norm = x.powf(exponent);
        scaled.push(
            s.iter()
                .map(|v| if v.1 { f64::INFINITY } else { v.0 / norm })
                .collect::<Vec<f64>>(),
        );
    }
    let m = xs.len() * (xs.len() - 1) / 2;
    let level = bonferroni(LEVEL_MULTIPLE, m);
    let mut pairs = Vec::with_capacity(m);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            pairs.push(ScalingPair {
                x_i: xs[i],
                x_j: xs[j],
                ks: ks_two_sample(&scaled[i], &scaled[j], level),
            });
        }
    }
    let censored_fraction = censored as f64 / (n * xs.len()) as f64;
    Ok(ScalingReport {
        exponent,
        level,
        any_rejected: pairs.iter().any(|p| p.ks.rejected),
        pairs,
        censored_fraction,
        inconclusive: censored_fraction > 0.05,
    })
}

// ---------------------------------------------------------------------------
// Kernel law

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelLawReport {
    pub alpha: f64,
    pub x: f64,
    pub ks: KSReport,
    pub censored: usize,
    /// Pathwise steps that ended by creeping (must be zero).
    pub crept: usize,
}

impl KernelLawReport {
    pub fn pass(&self) -> bool {
        !self.ks.rejected && self.censored == 0 && self.crept == 0
    }

    pub fn block(&self, model: &LevyModel, n: usize, seed: u64) -> Result<CheckBlock> {
        CheckBlock::new(
            "kernel-law",
            model.spec,
            serde_json::json!({"x": self.x}),
            n,
            seed,
            self,
            self.pass(),
        )
    }
}

/// Two-sample KS (1%) between pathwise undershoot ratios `X_{tau-}/x` and
/// exact `Beta(1 - alpha, alpha)` draws for the negative stable subordinator.
pub fn check_kernel_law_stable(
    model: &LevyModel,
    x: f64,
    n: usize,
    params: &SimParams,
    seed: u64,
) -> Result<KernelLawReport> {
    let alpha = match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => alpha,
        _ => {
            return Err(Error::precondition(
                "check_kernel_law_stable",
                "model is not the negative stable subordinator",
            ))
        }
    };
    let path = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::KERNEL, i as u64);
        kernel_step_pathwise(model, x, params, &mut rng)
    }))?;
    let censored = path
        .iter()
        .filter(|s| matches!(s, KernelStep::Censored { .. }))
        .count();
    let crept = path
        .iter()
        .filter(|s| matches!(s, KernelStep::Step { crept: true, .. }))
        .count();
    let ratios: Vec<f64> = path
        .iter()
        .filter_map(|s| match *s {
            KernelStep::Step { next, .. } => Some(next / x),
            KernelStep::Censored { .. } => None,
        })
        .collect();
    let exact = collect(map_replicas(n, |i| {
        let mut rng = substream(seed, domain::ORACLE, i as u64);
        kernel_step_closed_form(model, 1.0, &mut rng).map(|s| s.0)
    }))?;
    Ok(KernelLawReport {
        alpha,
        x,
        ks: ks_two_sample(&ratios, &exact, LEVEL_MULTIPLE),
        censored,
        crept,
    })
}

/// Lifetimes of a batch reduced to `(mean of uncensored, censored count)`.
pub fn summarize_lifetimes(samples: &[(f64, bool, usize)]) -> EstimateWithCI {
    let censored = samples.iter().filter(|s| s.1).count();
    let finite: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut e = EstimateWithCI::from_samples(&finite, censored);
    e.censored_fraction = censored as f64 / samples.len().max(1) as f64;
    e
}
