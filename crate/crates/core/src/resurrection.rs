//! Resurrection construction: every jump that would take the process below
//! zero is removed and the driving increments restart from the pre-jump
//! position. A continuous passage through zero (creeping) ends the process.
//!
//! Also provides the resurrection kernel (pathwise, and in closed form for
//! negative subordinators) and lifetime estimation by chaining kernel steps.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;

use crate::analytics::renewal_value;
use crate::error::{Error, Result};
use crate::models::{open01, sample_positive_stable, LevyModel, ModelSpec};
use crate::path::{
    first_passage_below, run_first_passage, CrossingKind, Driver, JumpRecord, SimParams, SimPath,
};
use crate::quad;

/// When to stop a cascade of resurrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionPolicy {
    /// Level threshold relative to the start point.
    pub eps_abs_rel: f64,
    /// Threshold on the sum of the last `k_gaps` gaps, relative to the
    /// elapsed time.
    pub eps_time_rel: f64,
    pub k_gaps: usize,
    /// Maximum number of resurrections.
    pub n_max: usize,
    /// Node budget of a recorded trace, checked after each excursion; a
    /// trace that exceeds it stops as `BudgetExhausted`. Times-only runs
    /// ignore it.
    pub max_path_nodes: usize,
    /// Optional wall-clock cap per trace. Off by default because it makes
    /// results depend on machine speed.
    #[serde(skip)]
    pub max_wall: Option<Duration>,
}

impl Default for AbsorptionPolicy {
    fn default() -> Self {
        AbsorptionPolicy {
            eps_abs_rel: 1e-6,
            eps_time_rel: 1e-8,
            k_gaps: 10,
            n_max: 100_000,
            max_path_nodes: 2_000_000,
            max_wall: None,
        }
    }
}

impl AbsorptionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_abs_rel > 0.0) {
            return Err(Error::param("eps_abs_rel", self.eps_abs_rel, "must be > 0"));
        }
        if !(self.eps_time_rel > 0.0) {
            return Err(Error::param(
                "eps_time_rel",
                self.eps_time_rel,
                "must be > 0",
            ));
        }
        if self.k_gaps == 0 {
            return Err(Error::param("k_gaps", 0.0, "must be >= 1"));
        }
        if self.n_max == 0 {
            return Err(Error::param("n_max", 0.0, "must be >= 1"));
        }
        if self.max_path_nodes == 0 {
            return Err(Error::param("max_path_nodes", 0.0, "must be >= 1"));
        }
        Ok(())
    }
}

/// Rolling state shared by the trace and lifetime loops.
struct Cascade<'a> {
    policy: &'a AbsorptionPolicy,
    start: f64,
    gaps: VecDeque<f64>,
    n: usize,
    began: Instant,
}

enum CascadeState {
    Continue,
    Absorbed,
    Exhausted,
}

impl<'a> Cascade<'a> {
    fn new(policy: &'a AbsorptionPolicy, start: f64) -> Self {
        Cascade {
            policy,
            start,
            gaps: VecDeque::with_capacity(policy.k_gaps + 1),
            n: 0,
            began: Instant::now(),
        }
    }

    /// Record one resurrection at `level` after a gap, with `elapsed` the
    /// total time so far.
    fn record(&mut self, gap: f64, level: f64, elapsed: f64) -> CascadeState {
        self.n += 1;
        self.gaps.push_back(gap);
        if self.gaps.len() > self.policy.k_gaps {
            self.gaps.pop_front();
        }
        if level <= 0.0
            || (level < self.policy.eps_abs_rel * self.start
                && self.gaps.len() == self.policy.k_gaps
                && self.gaps.iter().sum::<f64>() < self.policy.eps_time_rel * elapsed)
        {
            return CascadeState::Absorbed;
        }
        if self.n >= self.policy.n_max
            || self
                .policy
                .max_wall
                .is_some_and(|w| self.began.elapsed() > w)
        {
            return CascadeState::Exhausted;
        }
        CascadeState::Continue
    }
}

/// How a resurrected trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TraceStatus {
    /// Resurrection times accumulated (geometric collapse of `Z`); carries
    /// the elapsed time as the lifetime estimate.
    AbsorbedNumerically(f64),
    SurvivedHorizon,
    BudgetExhausted,
    /// `Z` reached zero continuously at the carried time.
    CreptToZero(f64),
}

impl TraceStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TraceStatus::AbsorbedNumerically(_) => "absorbed-numerically",
            TraceStatus::SurvivedHorizon => "survived-horizon",
            TraceStatus::BudgetExhausted => "budget-exhausted",
            TraceStatus::CreptToZero(_) => "crept-to-zero",
        }
    }

    pub fn is_absorbed(&self) -> bool {
        matches!(
            self,
            TraceStatus::AbsorbedNumerically(_) | TraceStatus::CreptToZero(_)
        )
    }
}

/// A resurrected trajectory together with its driving path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResurrectionTrace {
    /// Path of `Z`; its jump records are the jumps that were kept.
    pub path: SimPath,
    /// Path of the driving process: `Z` with the removed jumps added back.
    pub driving: SimPath,
    /// Continuous increment into each node (`increments[0] = 0`).
    pub increments: Vec<f64>,
    /// Removed crossing jumps, indexed by node.
    pub removed: Vec<JumpRecord>,
    pub tau_seq: Vec<f64>,
    pub pos_seq: Vec<f64>,
    pub status: TraceStatus,
    pub start: f64,
    /// Value of `Z` when the construction stopped.
    pub terminal: f64,
}

struct Recorder {
    z: SimPath,
    x: SimPath,
    increments: Vec<f64>,
    removed: Vec<JumpRecord>,
}

impl Recorder {
    fn push(&mut self, t: f64, cont: f64, jump: Option<f64>, remove: bool) {
        let i = self.z.values.len();
        let z_prev = self.z.values[i - 1];
        let x_prev = self.x.values[i - 1];
        let z_pre = z_prev + cont;
        let x_pre = x_prev + cont;
        self.increments.push(cont);
        match jump {
            Some(j) if remove => {
                self.z.push(t, z_pre, None);
                self.removed.push(JumpRecord {
                    t,
                    size: j,
                    index: i,
                });
                self.x.push(t, x_pre + j, Some(j));
            }
            Some(j) => {
                self.z.push(t, z_pre + j, Some(j));
                self.x.push(t, x_pre + j, Some(j));
            }
            None => {
                self.z.push(t, z_pre, None);
                self.x.push(t, x_pre, None);
            }
        }
    }
}

/// Resurrect a path of `model` from `start` on `[0, horizon]`.
pub fn resurrect_path<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    horizon: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    rng: &mut R,
) -> Result<ResurrectionTrace> {
    resurrect_impl(model, start, horizon, params, policy, rng, true)
}

/// Same construction as [`resurrect_path`] but only the resurrection
/// times, positions and status are kept (the paths stay empty).
pub fn resurrection_times<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    horizon: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    rng: &mut R,
) -> Result<ResurrectionTrace> {
    resurrect_impl(model, start, horizon, params, policy, rng, false)
}

fn resurrect_impl<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    horizon: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    rng: &mut R,
    record: bool,
) -> Result<ResurrectionTrace> {
    params.validate(model)?;
    policy.validate()?;
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::domain("resurrect_path", start, "start must be > 0"));
    }
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", horizon, "must be > 0"));
    }
    let mut rec = Recorder {
        z: SimPath::new(start, horizon, params.truncation_delta, params.grid_dt),
        x: SimPath::new(start, horizon, params.truncation_delta, params.grid_dt),
        increments: vec![0.0],
        removed: Vec::new(),
    };
    let mut tau_seq = Vec::new();
    let mut pos_seq = Vec::new();
    let mut cascade = Cascade::new(policy, start);
    let mut t = 0.0;
    let mut level = start;

    let status = loop {
        let budget = params.step_budget().min(horizon - t);
        let driver = Driver::new(model, params.effective_delta(level), params.grid_dt, false)?;
        // hold back the last segment: it is the crossing one if a crossing occurs
        let mut pending: Option<(f64, f64, Option<f64>)> = None;
        let fp = run_first_passage(&driver, level, t, budget, rng, |seg| {
            if record {
                if let Some((t1, cont, jump)) = pending.take() {
                    rec.push(t1, cont, jump, false);
                }
                pending = Some((seg.t1, seg.cont, seg.has_jump.then_some(seg.jump)));
            }
        });
        let crossing = match fp.kind {
            CrossingKind::NotHit => {
                if let Some((t1, cont, jump)) = pending {
                    rec.push(t1, cont, jump, false);
                }
                t += fp.elapsed;
                level = fp.pre;
                break if t >= horizon {
                    TraceStatus::SurvivedHorizon
                } else {
                    TraceStatus::BudgetExhausted
                };
            }
            kind => kind,
        };
        if let Some((t1, cont, jump)) = pending {
            rec.push(t1, cont, jump, crossing != CrossingKind::Creep);
        }
        let t_cross = t + fp.tau;
        if crossing == CrossingKind::Creep {
            level = 0.0;
            break TraceStatus::CreptToZero(t_cross);
        }
        tau_seq.push(t_cross);
        pos_seq.push(fp.pre);
        let gap = fp.tau;
        t = t_cross;
        level = fp.pre;
        match cascade.record(gap, level, t) {
            CascadeState::Continue => {}
            CascadeState::Absorbed => break TraceStatus::AbsorbedNumerically(t),
            CascadeState::Exhausted => break TraceStatus::BudgetExhausted,
        }
        if record && rec.z.values.len() > policy.max_path_nodes {
            break TraceStatus::BudgetExhausted;
        }
    };
    Ok(ResurrectionTrace {
        path: rec.z,
        driving: rec.x,
        increments: rec.increments,
        removed: rec.removed,
        tau_seq,
        pos_seq,
        status,
        start,
        terminal: level,
    })
}

/// Outcome of [`audit_jump_removal`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub nodes: usize,
    pub removed: usize,
    /// Nodes where replaying the increments does not reproduce `Z` bitwise.
    pub z_mismatches: usize,
    /// Nodes where replaying with the removed jumps added back does not
    /// reproduce the driving path bitwise.
    pub driving_mismatches: usize,
    /// Removed jumps whose pre-jump value differs from the recorded
    /// resurrection position.
    pub position_mismatches: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.z_mismatches == 0 && self.driving_mismatches == 0 && self.position_mismatches == 0
    }
}

/// Replay the recorded increments and check that `Z` and the driving path
/// differ exactly by the removed jumps, bit for bit.
pub fn audit_jump_removal(trace: &ResurrectionTrace) -> AuditReport {
    let z = &trace.path;
    let x = &trace.driving;
    let n = z.values.len();
    let mut kept = vec![None; n];
    for j in &z.jumps {
        kept[j.index] = Some(j.size);
    }
    let mut removed = vec![None; n];
    for j in &trace.removed {
        removed[j.index] = Some(j.size);
    }
    let mut report = AuditReport {
        nodes: n,
        removed: trace.removed.len(),
        z_mismatches: 0,
        driving_mismatches: 0,
        position_mismatches: 0,
    };
    let (mut zr, mut xr) = (trace.start, trace.start);
    let mut n_removed = 0;
    for i in 1..n {
        let cont = trace.increments[i];
        let z_pre = zr + cont;
        let x_pre = xr + cont;
        zr = kept[i].map_or(z_pre, |j| z_pre + j);
        xr = match (kept[i], removed[i]) {
            (Some(j), _) | (None, Some(j)) => x_pre + j,
            (None, None) => x_pre,
        };
        if removed[i].is_some() {
            if trace.pos_seq.get(n_removed) != Some(&z_pre) {
                report.position_mismatches += 1;
            }
            n_removed += 1;
        }
        if zr.to_bits() != z.values[i].to_bits() {
            report.z_mismatches += 1;
            zr = z.values[i];
        }
        if xr.to_bits() != x.values[i].to_bits() {
            report.driving_mismatches += 1;
            xr = x.values[i];
        }
    }
    report
}

/// One step of the resurrection kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelStep {
    /// `next = X_{tau-}` (zero iff the path crept) after `tau_inc`.
    Step {
        next: f64,
        tau_inc: f64,
        crept: bool,
    },
    /// No passage below zero within the step budget.
    Censored { elapsed: f64 },
}

/// Sample `(X_{tau-}, tau)` under `P_x` by path simulation.
pub fn kernel_step_pathwise<R: Rng + ?Sized>(
    model: &LevyModel,
    x: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<KernelStep> {
    let fp = first_passage_below(model, x, params, rng)?;
    Ok(if fp.hit() {
        KernelStep::Step {
            next: if fp.crept { 0.0 } else { fp.pre },
            tau_inc: fp.tau,
            crept: fp.crept,
        }
    } else {
        KernelStep::Censored {
            elapsed: fp.elapsed,
        }
    })
}

fn require_neg_subordinator(model: &LevyModel, op: &'static str) -> Result<()> {
    match model.spec {
        ModelSpec::StableSubordinatorNeg { .. } | ModelSpec::GammaSubordinatorNeg { .. } => Ok(()),
        _ => Err(Error::Unsupported {
            op,
            family: model.family_name(),
        }),
    }
}

/// Kernel density `u*(x - y) pi_bar(-y)` of `X_{tau-}` under `P_x` for a
/// negative subordinator.
pub fn kernel_density_subordinator(model: &LevyModel, x: f64, y: f64) -> Result<f64> {
    require_neg_subordinator(model, "kernel_density_subordinator")?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(
            "kernel_density_subordinator",
            x,
            "x must be > 0",
        ));
    }
    if !(y > 0.0 && y < x) {
        return Err(Error::domain(
            "kernel_density_subordinator",
            y,
            "y must lie in (0, x)",
        ));
    }
    Ok(crate::analytics::renewal_density(model, x - y)? * model.tail_neg(y)?)
}

const KERNEL_QUAD_TOL: f64 = 1e-12;

/// `int_a^b k(x, y) dy` for `0 <= a < b <= x`.
///
/// The part with `y > x/2` is integrated by parts in `z = x - y`,
/// `int u*(z) pi_bar(x - z) dz = [U*(z) pi_bar(x - z)] - int U*(z) pi(x - z) dz`,
/// which removes the non-integrable-looking spike of `u*` at the origin
/// (slowly varying for the Gamma subordinator).
pub fn kernel_mass(model: &LevyModel, x: f64, a: f64, b: f64) -> Result<f64> {
    require_neg_subordinator(model, "kernel_mass")?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("kernel_mass", x, "x must be > 0"));
    }
    if !(0.0 <= a && a < b && b <= x) {
        return Err(Error::domain("kernel_mass", b, "need 0 <= a < b <= x"));
    }
    let mid = 0.5 * x;
    let err = std::cell::RefCell::new(None);
    let mut total = 0.0;
    if a < mid {
        let hi = b.min(mid);
        total += quad::integrate_singular_ends(
            |y| match kernel_density_subordinator(model, x, y) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            a,
            hi,
            KERNEL_QUAD_TOL,
        );
    }
    if b > mid {
        let z0 = x - b;
        let z1 = x - a.max(mid);
        let boundary = |z: f64| -> Result<f64> {
            if z <= 0.0 {
                Ok(0.0)
            } else {
                Ok(renewal_value(model, z)? * model.tail_neg(x - z)?)
            }
        };
        let inner = quad::integrate(
            |z| {
                if z <= 0.0 {
                    return 0.0;
                }
                match renewal_value(model, z).and_then(|u| Ok(u * model.density_neg(x - z)?)) {
                    Ok(v) => v,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            z0,
            z1,
            KERNEL_QUAD_TOL,
        );
        total += boundary(z1)? - boundary(z0)? - inner;
    }
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Tabulated inverse CDF of the kernel `K(x, .)` of a negative subordinator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelTable {
    pub x: f64,
    pub nodes: Vec<f64>,
    /// Normalized cumulative mass at each node.
    pub cdf: Vec<f64>,
    /// Total mass before normalization (should be 1).
    pub total_mass: f64,
}

impl KernelTable {
    /// Build on `cells` Chebyshev-clustered cells (dense at both ends,
    /// where the density is singular).
    pub fn new(model: &LevyModel, x: f64, cells: usize) -> Result<Self> {
        require_neg_subordinator(model, "KernelTable::new")?;
        if cells < 2 {
            return Err(Error::param("cells", cells as f64, "must be >= 2"));
        }
        let nodes: Vec<f64> = (0..=cells)
            .map(|j| {
                if j == cells {
                    x
                } else {
                    0.5 * x * (1.0 - (std::f64::consts::PI * j as f64 / cells as f64).cos())
                }
            })
            .collect();
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += kernel_mass(model, x, w[0], w[1])?.max(0.0);
            cdf.push(acc);
        }
        let total_mass = acc;
        if !(total_mass > 0.0 && total_mass.is_finite()) {
            return Err(Error::numerical(
                "KernelTable::new",
                format!("kernel mass {total_mass} at x = {x}"),
            ));
        }
        for c in &mut cdf {
            *c /= total_mass;
        }
        Ok(KernelTable {
            x,
            nodes,
            cdf,
            total_mass,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(open01(rng))
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let i = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (y0, y1) = (self.nodes[i - 1], self.nodes[i]);
        if c1 > c0 {
            y0 + (y1 - y0) * ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            y0
        }
    }
}

/// Exact kernel step for the negative stable subordinator: the position
/// ratio is `Beta(1 - alpha, alpha)` and, independently in the lifetime
/// identity, the passage time below `-z` is `(z / S)^alpha` with `S`
/// positive stable.
pub fn kernel_step_closed_form<R: Rng + ?Sized>(
    model: &LevyModel,
    x: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let alpha = match model.spec {
        ModelSpec::StableSubordinatorNeg { alpha } => alpha,
        _ => {
            return Err(Error::Unsupported {
                op: "kernel_step_closed_form",
                family: model.family_name(),
            })
        }
    };
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("kernel_step_closed_form", x, "x must be > 0"));
    }
    let beta = Beta::new(1.0 - alpha, alpha)
        .map_err(|e| Error::numerical("kernel_step_closed_form", e.to_string()))?;
    let next = x * beta.sample(rng);
    Ok((next, passage_time_stable_subordinator(alpha, x, rng)))
}

/// First passage time of the negative stable subordinator below `-z`.
pub fn passage_time_stable_subordinator<R: Rng + ?Sized>(alpha: f64, z: f64, rng: &mut R) -> f64 {
    (z / sample_positive_stable(alpha, rng)).powf(alpha)
}

/// How kernel steps are produced in [`simulate_lifetime`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelMode {
    Pathwise,
    /// Exact position chain and passage times (stable subordinator only).
    ClosedForm,
}

impl KernelMode {
    /// Closed form where available, path simulation otherwise.
    pub fn default_for(model: &LevyModel) -> Self {
        match model.spec {
            ModelSpec::StableSubordinatorNeg { .. } => KernelMode::ClosedForm,
            _ => KernelMode::Pathwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lifetime {
    Finite(f64),
    /// Lower bound on the lifetime.
    Censored(f64),
}

impl Lifetime {
    pub fn value(&self) -> f64 {
        match *self {
            Lifetime::Finite(t) | Lifetime::Censored(t) => t,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Lifetime::Censored(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeEstimate {
    pub zeta: Lifetime,
    pub n_resurrections: usize,
    pub final_level: f64,
}

/// Estimate the lifetime by chaining kernel steps:
/// `zeta = sum_n tau(Z(tau_n))` with the passage times independent of the
/// position chain.
pub fn simulate_lifetime<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    params: &SimParams,
    policy: &AbsorptionPolicy,
    mode: KernelMode,
    rng: &mut R,
) -> Result<LifetimeEstimate> {
    params.validate(model)?;
    policy.validate()?;
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::domain(
            "simulate_lifetime",
            start,
            "start must be > 0",
        ));
    }
    if mode == KernelMode::ClosedForm
        && !matches!(model.spec, ModelSpec::StableSubordinatorNeg { .. })
    {
        return Err(Error::Unsupported {
            op: "simulate_lifetime(closed-form)",
            family: model.family_name(),
        });
    }
    let mut cascade = Cascade::new(policy, start);
    let mut elapsed = 0.0;
    let mut level = start;
    loop {
        let (next, gap) = match mode {
            KernelMode::ClosedForm => kernel_step_closed_form(model, level, rng)?,
            KernelMode::Pathwise => match kernel_step_pathwise(model, level, params, rng)? {
                KernelStep::Step {
                    next,
                    tau_inc,
                    crept,
                } => {
                    if crept {
                        return Ok(LifetimeEstimate {
                            zeta: Lifetime::Finite(elapsed + tau_inc),
                            n_resurrections: cascade.n,
                            final_level: 0.0,
                        });
                    }
                    (next, tau_inc)
                }
                KernelStep::Censored { elapsed: e } => {
                    return Ok(LifetimeEstimate {
                        zeta: Lifetime::Censored(elapsed + e),
                        n_resurrections: cascade.n,
                        final_level: level,
                    })
                }
            },
        };
        elapsed += gap;
        level = next;
        match cascade.record(gap, level, elapsed) {
            CascadeState::Continue => {}
            state => {
                let zeta = if matches!(state, CascadeState::Absorbed) {
                    Lifetime::Finite(elapsed)
                } else {
                    Lifetime::Censored(elapsed)
                };
                return Ok(LifetimeEstimate {
                    zeta,
                    n_resurrections: cascade.n,
                    final_level: level,
                });
            }
        }
    }
}

/// CSV export of a trace: one row per resurrection plus a status footer.
pub fn trace_csv(trace: &ResurrectionTrace) -> String {
    let mut out = String::from("n,tau_n,z_tau_n\n");
    for (n, (t, z)) in trace.tau_seq.iter().zip(&trace.pos_seq).enumerate() {
        out.push_str(&format!("{},{:e},{:e}\n", n + 1, t, z));
    }
    let zeta = match trace.status {
        TraceStatus::AbsorbedNumerically(t) | TraceStatus::CreptToZero(t) => format!("{t:e}"),
        _ => String::new(),
    };
    out.push_str(&format!("# status,{},{}\n", trace.status.label(), zeta));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, ExpJumps};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn stable_sub(alpha: f64) -> LevyModel {
        make_model(ModelSpec::StableSubordinatorNeg { alpha }).unwrap()
    }

    #[test]
    fn brownian_motion_creeps_without_resurrection() {
        let bm = make_model(ModelSpec::BrownianCompoundPoisson {
            sigma: 1.0,
            drift: 0.0,
            jumps: ExpJumps::symmetric(0.0, 1.0),
        })
        .unwrap();
        let tr = resurrect_path(
            &bm,
            1.0,
            1e4,
            &SimParams::default(),
            &AbsorptionPolicy::default(),
            &mut rng(1),
        )
        .unwrap();
        assert!(tr.tau_seq.is_empty());
        assert!(matches!(tr.status, TraceStatus::CreptToZero(t) if t > 0.0));
        assert_eq!(*tr.path.values.last().unwrap(), 0.0);
        assert!(audit_jump_removal(&tr).passed());
    }

    #[test]
    fn symmetric_cp_survives_with_resurrections() {
        let m = make_model(ModelSpec::CompoundPoissonDrift {
            drift: 0.0,
            jumps: ExpJumps::symmetric(1.0, 1.0),
        })
        .unwrap();
        let tr = resurrect_path(
            &m,
            1.0,
            200.0,
            &SimParams::default(),
            &AbsorptionPolicy::default(),
            &mut rng(2),
        )
        .unwrap();
        assert_eq!(tr.status, TraceStatus::SurvivedHorizon);
        assert!(tr.tau_seq.len() > 5);
        assert!(tr.tau_seq.windows(2).all(|w| w[0] < w[1]));
        assert!(tr.path.values.iter().all(|&v| v >= 0.0));
        let audit = audit_jump_removal(&tr);
        assert!(audit.passed(), "{audit:?}");
        assert_eq!(audit.removed, tr.tau_seq.len());
        // every removed jump would have taken Z to or below zero
        for r in &tr.removed {
            assert!(tr.path.values[r.index] + r.size <= 0.0);
        }
    }

    #[test]
    fn stable_subordinator_trace_is_absorbed() {
        let m = stable_sub(0.5);
        let tr = resurrect_path(
            &m,
            1.0,
            1e3,
            &SimParams::default(),
            &AbsorptionPolicy::default(),
            &mut rng(3),
        )
        .unwrap();
        assert!(
            matches!(tr.status, TraceStatus::AbsorbedNumerically(_)),
            "{:?}",
            tr.status
        );
        assert!(tr.pos_seq.windows(2).all(|w| w[1] < w[0]));
        assert!(tr.pos_seq[0] < 1.0);
        let audit = audit_jump_removal(&tr);
        assert!(audit.passed(), "{audit:?}");
        let csv = trace_csv(&tr);
        assert!(csv.starts_with("n,tau_n,z_tau_n\n1,"));
        assert!(csv
            .trim_end()
            .ends_with(&format!("{:e}", tr.tau_seq.last().unwrap())));
    }

    #[test]
    fn times_only_matches_recorded_trace() {
        let m = stable_sub(0.6);
        let p = SimParams::default();
        let pol = AbsorptionPolicy::default();
        let a = resurrect_path(&m, 1.0, 1e3, &p, &pol, &mut rng(4)).unwrap();
        let b = resurrection_times(&m, 1.0, 1e3, &p, &pol, &mut rng(4)).unwrap();
        assert_eq!(a.tau_seq, b.tau_seq);
        assert_eq!(a.pos_seq, b.pos_seq);
        assert_eq!(a.status, b.status);
        assert_eq!(b.path.values.len(), 1);
    }

    #[test]
    fn kernel_steps() {
        let p = SimParams::default();
        let bm = make_model(ModelSpec::Stable {
            alpha: 2.0,
            rho_bar: 0.5,
            scale: 1.0,
        })
        .unwrap();
        for s in 0..20 {
            match kernel_step_pathwise(&bm, 1.0, &p, &mut rng(s)).unwrap() {
                KernelStep::Step { next, crept, .. } => assert!(crept && next == 0.0),
                other => panic!("{other:?}"),
            }
        }
        let cp = make_model(ModelSpec::CompoundPoissonDrift {
            drift: 0.0,
            jumps: ExpJumps::symmetric(1.0, 1.0),
        })
        .unwrap();
        for s in 0..20 {
            match kernel_step_pathwise(&cp, 1.0, &p, &mut rng(s)).unwrap() {
                KernelStep::Step { next, crept, .. } => assert!(!crept && next > 0.0),
                KernelStep::Censored { .. } => {}
            }
        }
        let up = make_model(ModelSpec::CompoundPoissonDrift {
            drift: 1.0,
            jumps: ExpJumps::symmetric(0.0, 1.0),
        })
        .unwrap();
        let p_short = SimParams {
            budget: Some(5.0),
            ..p
        };
        assert!(matches!(
            kernel_step_pathwise(&up, 1.0, &p_short, &mut rng(0)).unwrap(),
            KernelStep::Censored { elapsed } if (elapsed - 5.0).abs() < 1e-9
        ));
    }

    #[test]
    fn stable_kernel_density_closed_form() {
        let m = stable_sub(0.5);
        for y in [0.01, 0.3, 0.5, 0.99] {
            let d = kernel_density_subordinator(&m, 1.0, y).unwrap();
            assert_relative_eq!(d, 1.0 / (PI * (y * (1.0 - y)).sqrt()), max_relative = 1e-12);
        }
        // self-similarity
        let m = stable_sub(0.3);
        let (x, y) = (3.0, 1.2);
        let lhs = kernel_density_subordinator(&m, x, y).unwrap();
        let rhs = kernel_density_subordinator(&m, 1.0, y / x).unwrap() / x;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        assert!(kernel_density_subordinator(&m, 1.0, 1.0).is_err());
        assert!(kernel_density_subordinator(&m, 1.0, 0.0).is_err());
        let cp = make_model(ModelSpec::CompoundPoissonDrift {
            drift: 0.0,
            jumps: ExpJumps::symmetric(1.0, 1.0),
        })
        .unwrap();
        assert!(matches!(
            kernel_density_subordinator(&cp, 1.0, 0.5),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn kernel_integrates_to_one() {
        for alpha in [0.3, 0.5, 0.7] {
            let m = stable_sub(alpha);
            let mass = kernel_mass(&m, 1.0, 0.0, 1.0).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "alpha {alpha}: {mass}");
        }
        let g = make_model(ModelSpec::GammaSubordinatorNeg {
            shape: 1.0,
            rate: 1.0,
        })
        .unwrap();
        for x in [0.1, 1.0, 10.0] {
            let mass = kernel_mass(&g, x, 0.0, x).unwrap();
            assert!((mass - 1.0).abs() < 1e-4, "x {x}: {mass}");
        }
    }

    #[test]
    fn kernel_table_matches_beta_quantiles() {
        // Beta(1/2, 1/2) quantile: sin^2(pi u / 2)
        let t = KernelTable::new(&stable_sub(0.5), 1.0, 400).unwrap();
        assert!((t.total_mass - 1.0).abs() < 1e-6);
        for u in [0.05, 0.3, 0.5, 0.9] {
            let q = (PI * u / 2.0).sin().powi(2);
            assert!((t.quantile(u) - q).abs() < 1e-4, "u {u}");
        }
    }

    #[test]
    fn closed_form_lifetime_mean() {
        // E zeta = U*(1) / (1 - 2/pi) for alpha = 1/2
        let m = stable_sub(0.5);
        let n = 20_000;
        let mut r = rng(9);
        let mut sum = 0.0;
        let mut censored = 0;
        for _ in 0..n {
            let est = simulate_lifetime(
                &m,
                1.0,
                &SimParams::default(),
                &AbsorptionPolicy::default(),
                KernelMode::ClosedForm,
                &mut r,
            )
            .unwrap();
            censored += est.zeta.is_censored() as usize;
            sum += est.zeta.value();
        }
        assert_eq!(censored, 0);
        let mean = sum / n as f64;
        let exact = 2.0 / PI.sqrt() / (1.0 - 2.0 / PI);
        // heavy right tail: loose band
        assert!((mean - exact).abs() < 0.15 * exact, "{mean} vs {exact}");
    }

    #[test]
    fn lifetime_of_brownian_motion_has_no_resurrections() {
        let bm = make_model(ModelSpec::BrownianCompoundPoisson {
            sigma: 1.0,
            drift: -1.0,
            jumps: ExpJumps::symmetric(0.0, 1.0),
        })
        .unwrap();
        let est = simulate_lifetime(
            &bm,
            1.0,
            &SimParams::default(),
            &AbsorptionPolicy::default(),
            KernelMode::Pathwise,
            &mut rng(5),
        )
        .unwrap();
        assert_eq!(est.n_resurrections, 0);
        assert!(matches!(est.zeta, Lifetime::Finite(t) if t > 0.0));
        assert!(simulate_lifetime(
            &bm,
            1.0,
            &SimParams::default(),
            &AbsorptionPolicy::default(),
            KernelMode::ClosedForm,
            &mut rng(5)
        )
        .is_err());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let m = make_model(ModelSpec::CompoundPoissonDrift {
            drift: 0.0,
            jumps: ExpJumps::symmetric(1.0, 1.0),
        })
        .unwrap();
        let pol = AbsorptionPolicy {
            n_max: 3,
            ..Default::default()
        };
        let tr =
            resurrection_times(&m, 1.0, 1e9, &SimParams::default(), &pol, &mut rng(6)).unwrap();
        assert_eq!(tr.status, TraceStatus::BudgetExhausted);
        assert_eq!(tr.tau_seq.len(), 3);
        let pol = AbsorptionPolicy {
            max_path_nodes: 10,
            ..Default::default()
        };
        let tr = resurrect_path(&m, 1.0, 1e9, &SimParams::default(), &pol, &mut rng(6)).unwrap();
        assert_eq!(tr.status, TraceStatus::BudgetExhausted);
        assert!(tr.path.values.len() > 10);
        assert!(audit_jump_removal(&tr).passed());
    }
}
