//! Jump-resolved path simulation and first passage below zero.
//!
//! Jumps of absolute size at least the truncation level are simulated
//! exactly as a marked Poisson process. Smaller jumps are replaced by their
//! mean drift (`alpha < 1` stable and subordinators) or by a Gaussian slab
//! matched in variance (`alpha >= 1` stable). Drift and Brownian parts are
//! exact on the event grid, and sub-grid crossings of the Gaussian part
//! are caught with the Brownian-bridge correction.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{open01, sample_exp, LevyModel};

/// Simulation controls shared by the path, resurrection and lifetime code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimParams {
    pub grid_dt: f64,
    /// Absolute small-jump cutoff.
    pub truncation_delta: f64,
    /// Level-relative cutoff: first passages from level `x` use
    /// `min(truncation_delta, truncation_rel * x)`. Zero disables it.
    pub truncation_rel: f64,
    /// Time budget of a single first passage; `None` means `1e6 * grid_dt`.
    pub budget: Option<f64>,
    /// A creep is declared when `X_{tau-}` is within this multiple of the
    /// truncation level from zero.
    pub creep_tol_factor: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            grid_dt: 1e-2,
            truncation_delta: 1e-4,
            truncation_rel: 1e-4,
            budget: None,
            creep_tol_factor: 10.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self, model: &LevyModel) -> Result<()> {
        if !(self.grid_dt > 0.0 && self.grid_dt.is_finite()) {
            return Err(Error::param(
                "grid_dt",
                self.grid_dt,
                "must be finite and > 0",
            ));
        }
        if !(self.truncation_delta >= 0.0) {
            return Err(Error::param(
                "truncation_delta",
                self.truncation_delta,
                "must be >= 0",
            ));
        }
        if !(self.truncation_rel >= 0.0) {
            return Err(Error::param(
                "truncation_rel",
                self.truncation_rel,
                "must be >= 0",
            ));
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                return Err(Error::param("budget", b, "must be > 0"));
            }
        }
        if self.truncation_delta == 0.0 && !model.is_finite_activity() {
            return Err(Error::Configuration(format!(
                "truncation_delta = 0 is only allowed for finite-activity families, not {}",
                model.family_name()
            )));
        }
        Ok(())
    }

    pub fn step_budget(&self) -> f64 {
        self.budget.unwrap_or(1e6 * self.grid_dt)
    }

    pub fn effective_delta(&self, level: f64) -> f64 {
        if self.truncation_rel > 0.0 && level > 0.0 {
            self.truncation_delta.min(self.truncation_rel * level)
        } else {
            self.truncation_delta
        }
    }

    pub fn creep_tol(&self, level: f64) -> f64 {
        self.creep_tol_factor * self.effective_delta(level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub t: f64,
    pub size: f64,
    /// Index of the node whose value is the post-jump position.
    pub index: usize,
}

/// A discretized trajectory with explicit jump records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    pub horizon: f64,
    pub truncation_delta: f64,
    pub grid_dt: f64,
}

impl SimPath {
    pub(crate) fn new(start: f64, horizon: f64, truncation_delta: f64, grid_dt: f64) -> Self {
        SimPath {
            times: vec![0.0],
            values: vec![start],
            jumps: Vec::new(),
            horizon,
            truncation_delta,
            grid_dt,
        }
    }

    pub(crate) fn push(&mut self, t: f64, value: f64, jump: Option<f64>) {
        self.times.push(t);
        self.values.push(value);
        if let Some(size) = jump {
            self.jumps.push(JumpRecord {
                t,
                size,
                index: self.values.len() - 1,
            });
        }
    }

    /// Value at time `t` (right-continuous, piecewise constant between nodes).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    pub fn terminal(&self) -> f64 {
        *self
            .values
            .last()
            .expect("a path has at least its start node")
    }

    /// Left limit of the path at node `i`.
    pub fn left_limit(&self, i: usize) -> f64 {
        match self.jumps.binary_search_by_key(&i, |j| j.index) {
            Ok(k) => self.values[i] - self.jumps[k].size,
            Err(_) => self.values[i],
        }
    }
}

/// How the level was crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossingKind {
    /// A simulated jump took the path from above to at or below zero.
    Jump,
    /// The continuous part reached zero in a model that creeps downward.
    Creep,
    /// The compensating drift or slab reached zero in a model that does not
    /// creep; the crossing is attributed to a small jump from a position
    /// below the truncation level.
    SubResolution,
    NotHit,
}

/// Outcome of a first passage below zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassage {
    /// Passage time; `f64::INFINITY` when the budget ran out first.
    pub tau: f64,
    /// `X_{tau-}` (final position when not hit).
    pub pre: f64,
    /// `X_tau` (final position when not hit).
    pub post: f64,
    pub crept: bool,
    pub kind: CrossingKind,
    /// Time simulated, equal to `tau` when hit.
    pub elapsed: f64,
}

impl FirstPassage {
    pub fn hit(&self) -> bool {
        self.kind != CrossingKind::NotHit
    }
}

/// Piece of a path between two consecutive events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    /// Continuous increment; `x_pre == x0 + cont` exactly.
    pub cont: f64,
    /// Left limit at `t1`.
    pub x_pre: f64,
    /// Jump at `t1`, zero when the segment ends at a grid node or horizon.
    pub jump: f64,
    pub has_jump: bool,
}

impl Segment {
    /// Segment from `(t0, x0)` to `t1` whose left limit is `target`,
    /// optionally followed by a jump.
    fn cut(t0: f64, t1: f64, x0: f64, target: f64, jump: Option<f64>) -> Self {
        let cont = target - x0;
        Segment {
            t0,
            t1,
            x0,
            cont,
            x_pre: x0 + cont,
            jump: jump.unwrap_or(0.0),
            has_jump: jump.is_some(),
        }
    }

    pub fn x_post(&self) -> f64 {
        if self.has_jump {
            self.x_pre + self.jump
        } else {
            self.x_pre
        }
    }
}

/// Truncated dynamics of a model at a fixed small-jump cutoff.
#[derive(Debug, Clone)]
pub(crate) struct Driver<'a> {
    model: &'a LevyModel,
    pub drift: f64,
    pub variance: f64,
    rate_up: f64,
    rate_total: f64,
    pub delta: f64,
    grid_dt: f64,
    use_grid: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cursor {
    pub t: f64,
    pub x: f64,
    origin: f64,
    grid_k: u64,
    next_jump: f64,
}

impl<'a> Driver<'a> {
    pub fn new(model: &'a LevyModel, delta: f64, grid_dt: f64, force_grid: bool) -> Result<Self> {
        let trunc = model.truncate(delta)?;
        let drift = model.drift() + trunc.drift;
        let variance = model.sigma().powi(2) + trunc.slab_variance;
        Ok(Driver {
            model,
            drift,
            variance,
            rate_up: trunc.rate_up,
            rate_total: trunc.rate_up + trunc.rate_down,
            delta,
            grid_dt,
            use_grid: force_grid || variance > 0.0 || drift != 0.0,
        })
    }

    pub fn cursor<R: Rng + ?Sized>(&self, t: f64, x: f64, rng: &mut R) -> Cursor {
        Cursor {
            t,
            x,
            origin: t,
            grid_k: 1,
            next_jump: self.draw_jump_time(t, rng),
        }
    }

    fn draw_jump_time<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        if self.rate_total > 0.0 {
            t + sample_exp(self.rate_total, rng)
        } else {
            f64::INFINITY
        }
    }

    fn next_grid(&self, cur: &Cursor) -> f64 {
        if self.use_grid {
            cur.origin + cur.grid_k as f64 * self.grid_dt
        } else {
            f64::INFINITY
        }
    }

    /// Continuous increment over `dt`.
    fn continuous<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let mut inc = self.drift * dt;
        if self.variance > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            inc += (self.variance * dt).sqrt() * z;
        }
        inc
    }

    /// Advance to the next event no later than `t_end`.
    pub fn step<R: Rng + ?Sized>(&self, cur: &mut Cursor, t_end: f64, rng: &mut R) -> Segment {
        let grid = self.next_grid(cur);
        let boundary = grid.min(t_end);
        let (t1, has_jump) = if cur.next_jump < boundary {
            (cur.next_jump, true)
        } else {
            (boundary, false)
        };
        let cont = self.continuous(t1 - cur.t, rng);
        let x_pre = cur.x + cont;
        let jump = if has_jump {
            let up = rng.random::<f64>() * self.rate_total < self.rate_up;
            cur.next_jump = self.draw_jump_time(t1, rng);
            if up {
                self.model.sample_jump_pos(self.delta, rng)
            } else {
                self.model.sample_jump_neg(self.delta, rng)
            }
        } else {
            if t1 == grid {
                cur.grid_k += 1;
            }
            0.0
        };
        let seg = Segment {
            t0: cur.t,
            t1,
            x0: cur.x,
            cont,
            x_pre,
            jump,
            has_jump,
        };
        cur.t = t1;
        cur.x = seg.x_post();
        seg
    }

    /// Check a segment started above zero for a crossing. Returns the
    /// crossing (with the segment cut at the crossing time) or `None`.
    pub fn crossing<R: Rng + ?Sized>(
        &self,
        seg: &Segment,
        rng: &mut R,
    ) -> Option<(FirstPassage, Segment)> {
        let dt = seg.t1 - seg.t0;
        // continuous part first
        let continuous_hit = if seg.x_pre <= 0.0 {
            // exact for pure drift, linear interpolation for the Gaussian part
            let frac = seg.x0 / (seg.x0 - seg.x_pre);
            Some(seg.t0 + frac.clamp(0.0, 1.0) * dt)
        } else if self.variance > 0.0 && dt > 0.0 {
            let p = (-2.0 * seg.x0 * seg.x_pre / (self.variance * dt)).exp();
            if rng.random::<f64>() < p {
                Some(seg.t0 + 0.5 * dt)
            } else {
                None
            }
        } else {
            None
        };
        if let Some(tau) = continuous_hit {
            if self.model.flags.creeps_down {
                let cut = Segment::cut(seg.t0, tau, seg.x0, 0.0, None);
                let fp = FirstPassage {
                    tau,
                    pre: cut.x_pre,
                    post: cut.x_pre,
                    crept: true,
                    kind: CrossingKind::Creep,
                    elapsed: tau,
                };
                return Some((fp, cut));
            }
            let pre = open01(rng) * self.delta.min(seg.x0);
            let tau = if self.variance > 0.0 {
                tau
            } else {
                seg.t0 + (seg.x0 - pre) / (-self.drift)
            };
            let cut = Segment::cut(seg.t0, tau, seg.x0, pre, Some(-pre));
            let fp = FirstPassage {
                tau,
                pre: cut.x_pre,
                post: cut.x_post().min(0.0),
                crept: false,
                kind: CrossingKind::SubResolution,
                elapsed: tau,
            };
            return Some((fp, cut));
        }
        if seg.has_jump && seg.x_post() <= 0.0 {
            let fp = FirstPassage {
                tau: seg.t1,
                pre: seg.x_pre,
                post: seg.x_post(),
                crept: false,
                kind: CrossingKind::Jump,
                elapsed: seg.t1,
            };
            return Some((fp, *seg));
        }
        None
    }
}

/// Run a first passage below zero from `start` at time `t0`, feeding every
/// segment (the last one cut at the crossing) to `observe`. Times in the
/// result are relative to `t0`.
pub(crate) fn run_first_passage<R, F>(
    driver: &Driver<'_>,
    start: f64,
    t0: f64,
    budget: f64,
    rng: &mut R,
    mut observe: F,
) -> FirstPassage
where
    R: Rng + ?Sized,
    F: FnMut(&Segment),
{
    let t_end = t0 + budget;
    let mut cur = driver.cursor(t0, start, rng);
    loop {
        let seg = driver.step(&mut cur, t_end, rng);
        if let Some((mut fp, cut)) = driver.crossing(&seg, rng) {
            observe(&cut);
            fp.tau -= t0;
            fp.elapsed = fp.tau;
            return fp;
        }
        observe(&seg);
        if cur.t >= t_end {
            return FirstPassage {
                tau: f64::INFINITY,
                pre: cur.x,
                post: cur.x,
                crept: false,
                kind: CrossingKind::NotHit,
                elapsed: cur.t - t0,
            };
        }
    }
}

/// Simulate a path of `model` from `start` on `[0, horizon]`.
pub fn sample_path<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    horizon: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<SimPath> {
    params.validate(model)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", horizon, "must be finite and > 0"));
    }
    let driver = Driver::new(model, params.truncation_delta, params.grid_dt, true)?;
    let mut path = SimPath::new(start, horizon, params.truncation_delta, params.grid_dt);
    let mut cur = driver.cursor(0.0, start, rng);
    while cur.t < horizon {
        let seg = driver.step(&mut cur, horizon, rng);
        path.push(seg.t1, seg.x_post(), seg.has_jump.then_some(seg.jump));
    }
    Ok(path)
}

/// First passage of `model` below zero from `start > 0`.
pub fn first_passage_below<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<FirstPassage> {
    first_passage_impl(model, start, params, rng, |_| {})
}

/// First passage together with the simulated path up to the crossing.
pub fn first_passage_with_path<R: Rng + ?Sized>(
    model: &LevyModel,
    start: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<(FirstPassage, SimPath)> {
    let delta = params.effective_delta(start);
    let mut path = SimPath::new(start, params.step_budget(), delta, params.grid_dt);
    let fp = first_passage_impl(model, start, params, rng, |seg| {
        path.push(seg.t1, seg.x_post(), seg.has_jump.then_some(seg.jump));
    })?;
    Ok((fp, path))
}

pub(crate) fn first_passage_impl<R, F>(
    model: &LevyModel,
    start: f64,
    params: &SimParams,
    rng: &mut R,
    observe: F,
) -> Result<FirstPassage>
where
    R: Rng + ?Sized,
    F: FnMut(&Segment),
{
    params.validate(model)?;
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::domain(
            "first_passage_below",
            start,
            "start must be > 0",
        ));
    }
    let driver = Driver::new(model, params.effective_delta(start), params.grid_dt, false)?;
    Ok(run_first_passage(
        &driver,
        start,
        0.0,
        params.step_budget(),
        rng,
        observe,
    ))
}

/// Integral of `g(X_s)` over a segment by the trapezoid rule on its
/// endpoints (left value and left limit at the right end).
pub(crate) fn trapezoid(seg: &Segment, mut g: impl FnMut(f64) -> f64) -> f64 {
    let (a, b) = (g(seg.x0), g(seg.x_pre));
    0.5 * (seg.t1 - seg.t0) * (a + b)
}
