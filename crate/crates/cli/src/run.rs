//! Command dispatch. Every command validates the model, simulation and
//! policy parameters before any computation starts.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use reslevy::analytics::{classify, classify_stable_params, stable_mean_xi, Verdict};
use reslevy::exec::{domain, map_replicas, substream};
use reslevy::mc_verify::{self, TestFn};
use reslevy::report::{fmt_f64, json_report, CheckBlock, CsvTable, ReportHeader};
use reslevy::resurrection::{
    audit_jump_removal, resurrect_path, trace_csv, AbsorptionPolicy, KernelMode, TraceStatus,
};
use reslevy::stats::{LEVEL_MULTIPLE, LEVEL_PRIMARY};
use reslevy::{make_model, ExpJumps, LevyModel, ModelSpec, SimParams};

use crate::config::{Command, Config, ConfigError, RunConfig};
use crate::error::CliError;
use crate::output::write_atomic;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "RESLEVY_SEED";

const DEFAULT_N_PATHS: u64 = 1000;
const DEFAULT_HORIZON: f64 = 100.0;

/// Result of a command: whether all checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::CheckFailed => 2,
        }
    }
}

/// Everything a command needs, validated.
struct Context {
    command: Command,
    config: Config,
    seed: u64,
    out: Option<PathBuf>,
}

impl Context {
    fn header(
        &self,
        params: Option<&SimParams>,
        policy: Option<&AbsorptionPolicy>,
    ) -> ReportHeader {
        let mut h = ReportHeader::new(self.command.name(), self.seed);
        if let Some(p) = params {
            h = h
                .tolerance("grid_dt", p.grid_dt)
                .tolerance("truncation_delta", p.truncation_delta)
                .tolerance("truncation_rel", p.truncation_rel)
                .tolerance("creep_tol_factor", p.creep_tol_factor);
            if let Some(b) = p.budget {
                h = h.tolerance("budget", b);
            }
        }
        if let Some(p) = policy {
            h = h
                .tolerance("eps_abs_rel", p.eps_abs_rel)
                .tolerance("eps_time_rel", p.eps_time_rel)
                .tolerance("k_gaps", p.k_gaps as f64)
                .tolerance("n_max", p.n_max as f64)
                .tolerance("max_path_nodes", p.max_path_nodes as f64);
        }
        h.timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| format!("unix:{}", d.as_secs()));
        h
    }

    /// Write `contents` to the output directory, or print it when none is
    /// configured.
    fn emit(&self, name: &str, contents: &str) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                let p = write_atomic(dir, name, contents)?;
                eprintln!("wrote {}", p.display());
            }
            None => print!("{contents}"),
        }
        Ok(())
    }
}

pub fn run(rc: RunConfig, seed_override: Option<&str>) -> Result<Outcome, CliError> {
    let seed = match seed_override {
        Some(s) => s.trim().parse::<u64>().map_err(|_| ConfigError::BadValue {
            key: SEED_ENV.into(),
            value: s.into(),
            kind: "a non-negative integer",
        })?,
        None => rc.config.int_or("seed", 0),
    };
    let ctx = Context {
        command: rc.command,
        out: rc.config.str("out").map(PathBuf::from),
        config: rc.config,
        seed,
    };
    let outcome = match ctx.command {
        Command::Classify => cmd_classify(&ctx),
        Command::CriteriaMap => cmd_criteria_map(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Lifetime => cmd_lifetime(&ctx),
        Command::Verify => cmd_verify(&ctx),
    }?;
    if let Some(dir) = &ctx.out {
        // Resolved configuration, re-runnable with `--config`.
        let mut resolved = ctx.config.clone();
        resolved.set("seed", &ctx.seed.to_string())?;
        let text = format!(
            "{}{}",
            ctx.header(None, None).csv_lines(),
            resolved.serialize()
        );
        write_atomic(dir, "config.txt", &text)?;
    }
    Ok(outcome)
}

fn jumps(cfg: &Config) -> Result<ExpJumps, ConfigError> {
    Ok(ExpJumps {
        rate_up: cfg.require_num("rate_up")?,
        mu_up: cfg.require_num("mu_up")?,
        rate_down: cfg.require_num("rate_down")?,
        mu_down: cfg.require_num("mu_down")?,
    })
}

/// Model specification from the `family` key and its parameters.
pub fn model_spec(cfg: &Config) -> Result<ModelSpec, ConfigError> {
    let family = cfg.require_str("family")?;
    Ok(match family {
        "stable" => ModelSpec::Stable {
            alpha: cfg.require_num("alpha")?,
            rho_bar: cfg.require_num("rhobar")?,
            scale: cfg.num_or("scale", 1.0),
        },
        "stable-subordinator" => ModelSpec::StableSubordinatorNeg {
            alpha: cfg.require_num("alpha")?,
        },
        "gamma-subordinator" => ModelSpec::GammaSubordinatorNeg {
            shape: cfg.require_num("shape")?,
            rate: cfg.require_num("rate")?,
        },
        "compound-poisson" => ModelSpec::CompoundPoissonDrift {
            drift: cfg.num_or("drift", 0.0),
            jumps: jumps(cfg)?,
        },
        "brownian-cp" => ModelSpec::BrownianCompoundPoisson {
            sigma: cfg.require_num("sigma")?,
            drift: cfg.num_or("drift", 0.0),
            jumps: jumps(cfg)?,
        },
        other => {
            return Err(ConfigError::BadValue {
                key: "family".into(),
                value: other.into(),
                kind: "one of compound-poisson, stable, stable-subordinator, gamma-subordinator, brownian-cp",
            })
        }
    })
}

fn sim_params(cfg: &Config, model: &LevyModel) -> Result<SimParams, CliError> {
    let d = SimParams::default();
    let p = SimParams {
        grid_dt: cfg.num_or("grid_dt", d.grid_dt),
        truncation_delta: cfg.num_or("truncation_delta", d.truncation_delta),
        truncation_rel: cfg.num_or("truncation_rel", d.truncation_rel),
        budget: cfg.num("budget").or(d.budget),
        creep_tol_factor: d.creep_tol_factor,
    };
    p.validate(model)?;
    Ok(p)
}

fn policy(cfg: &Config) -> Result<AbsorptionPolicy, CliError> {
    let d = AbsorptionPolicy::default();
    let p = AbsorptionPolicy {
        eps_abs_rel: cfg.num_or("eps_abs", d.eps_abs_rel),
        eps_time_rel: cfg.num_or("eps_time", d.eps_time_rel),
        k_gaps: cfg.int_or("k_gaps", d.k_gaps as u64) as usize,
        n_max: cfg.int_or("n_max", d.n_max as u64) as usize,
        max_path_nodes: cfg.int_or("max_nodes", d.max_path_nodes as u64) as usize,
        max_wall: None,
    };
    p.validate()?;
    Ok(p)
}

fn starts(cfg: &Config) -> Result<Vec<f64>, ConfigError> {
    let xs = cfg
        .list("starts")
        .unwrap_or_else(|| vec![cfg.num_or("start", 1.0)]);
    match xs.iter().find(|x| **x <= 0.0) {
        Some(x) => Err(ConfigError::BadValue {
            key: "starts".into(),
            value: x.to_string(),
            kind: "positive start levels",
        }),
        None => Ok(xs),
    }
}

fn kernel_mode(cfg: &Config, model: &LevyModel) -> Result<KernelMode, ConfigError> {
    match cfg.str("kernel_mode") {
        None => Ok(KernelMode::default_for(model)),
        Some("pathwise") => Ok(KernelMode::Pathwise),
        Some("closed-form") => Ok(KernelMode::ClosedForm),
        Some(other) => Err(ConfigError::BadValue {
            key: "kernel_mode".into(),
            value: other.into(),
            kind: "pathwise or closed-form",
        }),
    }
}

fn n_paths(cfg: &Config) -> Result<usize, ConfigError> {
    match cfg.int_or("n_paths", DEFAULT_N_PATHS) {
        0 => Err(ConfigError::BadValue {
            key: "n_paths".into(),
            value: "0".into(),
            kind: "a positive integer",
        }),
        n => Ok(n as usize),
    }
}

fn horizon(cfg: &Config) -> Result<f64, ConfigError> {
    let h = cfg.num_or("horizon", DEFAULT_HORIZON);
    if h > 0.0 {
        Ok(h)
    } else {
        Err(ConfigError::BadValue {
            key: "horizon".into(),
            value: h.to_string(),
            kind: "a positive number",
        })
    }
}

fn model(cfg: &Config) -> Result<LevyModel, CliError> {
    Ok(make_model(model_spec(cfg)?)?)
}

fn cmd_classify(ctx: &Context) -> Result<Outcome, CliError> {
    let m = model(&ctx.config)?;
    let v = classify(&m);
    let body = json!({ "model": m.spec, "verdict": v.verdict, "rule": v.rule.id(), "evidence": v.evidence });
    ctx.emit(
        "classify.json",
        &json_report(&ctx.header(None, None), body)?,
    )?;
    Ok(Outcome::Pass)
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::AbsorbedAS => "AbsorbedAS",
        Verdict::Conservative => "Conservative",
        Verdict::NotAbsorbedWProb1 => "NotAbsorbedWProb1",
        Verdict::Unknown => "Unknown",
    }
}

/// Admissible `(alpha, rho_bar)` for a strictly stable law, judged on the
/// raw parameters (`alpha = 1` admits any `rho_bar` through the drift).
fn stable_cell_admissible(alpha: f64, rho_bar: f64) -> bool {
    let tol = 1e-12;
    alpha > 0.0
        && alpha <= 2.0
        && (0.0..=1.0).contains(&rho_bar)
        && (alpha <= 1.0 || (alpha * rho_bar <= 1.0 + tol && alpha * (1.0 - rho_bar) <= 1.0 + tol))
}

fn cmd_criteria_map(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let family = cfg.require_str("family")?;
    if family != "stable" {
        return Err(ConfigError::BadValue {
            key: "family".into(),
            value: family.into(),
            kind: "stable (criteria-map covers the stable family)",
        }
        .into());
    }
    let alphas = cfg.grid("alpha_grid")?;
    let rhos = cfg.grid("rho_grid")?;
    let mut table = CsvTable::new(&["alpha", "rho_bar", "B", "verdict"]);
    for &a in &alphas {
        for &r in &rhos {
            let (b, label) = if !stable_cell_admissible(a, r) {
                (String::new(), "inadmissible")
            } else {
                match stable_mean_xi(a, r) {
                    Ok(b) => (
                        fmt_f64(b),
                        verdict_label(classify_stable_params(a, r).verdict),
                    ),
                    Err(_) => (String::new(), "Unknown"),
                }
            };
            table.push(vec![fmt_f64(a), fmt_f64(r), b, label.into()]);
        }
    }
    ctx.emit("criteria_map.csv", &table.render(&ctx.header(None, None)))?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct TraceSummary {
    replica: usize,
    status: &'static str,
    zeta: Option<f64>,
    n_resurrections: usize,
    terminal: f64,
    audit_passed: bool,
}

fn cmd_simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let m = model(cfg)?;
    let params = sim_params(cfg, &m)?;
    let pol = policy(cfg)?;
    let start = starts(cfg)?[0];
    let horizon = horizon(cfg)?;
    let n = cfg.int_or("n_paths", 1).max(1) as usize;
    let header = ctx
        .header(Some(&params), Some(&pol))
        .tolerance("horizon", horizon);
    let traces = map_replicas(n, |i| {
        let mut rng = substream(ctx.seed, domain::TRACE, i as u64);
        resurrect_path(&m, start, horizon, &params, &pol, &mut rng)
    });
    let mut summary = Vec::with_capacity(n);
    for (i, t) in traces.into_iter().enumerate() {
        let t = t?;
        let audit = audit_jump_removal(&t);
        if ctx.out.is_some() {
            let csv = format!("{}{}", header.csv_lines(), trace_csv(&t));
            ctx.emit(&format!("trace_{i}.csv"), &csv)?;
        }
        summary.push(TraceSummary {
            replica: i,
            status: t.status.label(),
            zeta: match t.status {
                TraceStatus::AbsorbedNumerically(z) | TraceStatus::CreptToZero(z) => Some(z),
                _ => None,
            },
            n_resurrections: t.tau_seq.len(),
            terminal: t.terminal,
            audit_passed: audit.passed(),
        });
    }
    let pass = summary.iter().all(|s| s.audit_passed);
    let body = json!({ "model": m.spec, "start": start, "horizon": horizon, "traces": summary, "pass": pass });
    ctx.emit("simulate.json", &json_report(&header, body)?)?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

fn cmd_lifetime(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let m = model(cfg)?;
    let params = sim_params(cfg, &m)?;
    let pol = policy(cfg)?;
    let xs = starts(cfg)?;
    let n = n_paths(cfg)?;
    let mode = kernel_mode(cfg, &m)?;
    let header = ctx.header(Some(&params), Some(&pol));
    let mut table = CsvTable::new(&[
        "replica",
        "start",
        "zeta_or_censor",
        "censored",
        "n_resurrections",
    ]);
    let mut rows = Vec::new();
    for (si, &x) in xs.iter().enumerate() {
        let samples = mc_verify::lifetime_samples(
            &m,
            x,
            n,
            &params,
            &pol,
            mode,
            ctx.seed,
            (si as u64) << 40,
        )?;
        for (i, (z, c, k)) in samples.iter().enumerate() {
            table.push(vec![
                i.to_string(),
                fmt_f64(x),
                fmt_f64(*z),
                c.to_string(),
                k.to_string(),
            ]);
        }
        rows.push(json!({ "start": x, "zeta": mc_verify::summarize_lifetimes(&samples) }));
    }
    let body =
        json!({ "model": m.spec, "kernel_mode": format!("{mode:?}"), "n": n, "starts": rows });
    if ctx.out.is_some() {
        ctx.emit("lifetime.csv", &table.render(&header))?;
    }
    ctx.emit("lifetime.json", &json_report(&header, body)?)?;
    Ok(Outcome::Pass)
}

const ALL_CHECKS: &[&str] = &[
    "exp-law",
    "feynman-kac",
    "domination",
    "lifetime",
    "kernel",
    "scaling",
    "invariance",
    "probe",
];

fn run_check(
    name: &str,
    ctx: &Context,
    m: &LevyModel,
    params: &SimParams,
    pol: &AbsorptionPolicy,
) -> Result<CheckBlock, CliError> {
    let cfg = &ctx.config;
    let seed = ctx.seed;
    let xs = starts(cfg)?;
    let x = xs[0];
    let n = n_paths(cfg)?;
    let block = match name {
        "exp-law" => mc_verify::check_exponential_law(m, x, n, params, seed)?.block(m, seed)?,
        "feynman-kac" => {
            let f_raw = cfg.str("f").unwrap_or("f2");
            let f = TestFn::parse(f_raw).ok_or_else(|| ConfigError::BadValue {
                key: "f".into(),
                value: f_raw.into(),
                kind: "zero, f1, f2 or f3:<m>",
            })?;
            let t = cfg.num_or("t", 1.0);
            mc_verify::check_feynman_kac(m, x, t, f, n, params, seed)?.block(m, seed)?
        }
        "domination" => {
            let n_res = cfg.int_or("n_res", 5) as usize;
            mc_verify::check_stochastic_domination(m, x, n_res, n, horizon(cfg)?, params, seed)?.block(m, seed)?
        }
        "lifetime" => {
            let mode = kernel_mode(cfg, m)?;
            mc_verify::check_lifetime_bound(m, x, n, params, pol, mode, seed)?.block(m, seed)?
        }
        "kernel" => mc_verify::check_kernel_law_stable(m, x, n, params, seed)?.block(m, n, seed)?,
        "scaling" => mc_verify::check_scaling_stable(m, &xs, n, None, params, pol, seed)?.block(m, n, seed)?,
        "invariance" => {
            let lambda = cfg.num_or("lambda", 1.0);
            mc_verify::check_kernel_invariance(m, &xs, n, lambda, params, pol, seed)?.block(m, seed)?
        }
        "probe" => {
            mc_verify::probe_zero_one_conjecture(m, &xs, n, horizon(cfg)?, params, pol, seed)?.block(m, seed)?
        }
        other => {
            return Err(ConfigError::BadValue {
                key: "check".into(),
                value: other.into(),
                kind: "all or one of exp-law, feynman-kac, domination, lifetime, kernel, scaling, invariance, probe",
            }
            .into())
        }
    };
    Ok(block)
}

fn cmd_verify(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let m = model(cfg)?;
    let params = sim_params(cfg, &m)?;
    let pol = policy(cfg)?;
    n_paths(cfg)?;
    let which = cfg.str("check").unwrap_or("all");
    let header = ctx
        .header(Some(&params), Some(&pol))
        .tolerance("ks_level", LEVEL_PRIMARY)
        .tolerance("ks_level_multiple", LEVEL_MULTIPLE);
    let mut blocks = Vec::new();
    let mut skipped: Vec<Value> = Vec::new();
    if which == "all" {
        // Run every check whose preconditions hold for this model.
        let n_starts = starts(cfg)?.len();
        for name in ALL_CHECKS {
            if *name == "scaling" && n_starts < 2 {
                skipped.push(json!({ "check": name, "reason": "needs at least two start levels (--starts)" }));
                continue;
            }
            match run_check(name, ctx, &m, &params, &pol) {
                Ok(b) => blocks.push(b),
                Err(CliError::Core(
                    e @ (reslevy::Error::Precondition { .. } | reslevy::Error::Unsupported { .. }),
                )) => skipped.push(json!({ "check": name, "reason": e.to_string() })),
                Err(e) => return Err(e),
            }
        }
    } else {
        blocks.push(run_check(which, ctx, &m, &params, &pol)?);
    }
    let pass = blocks.iter().all(|b| b.pass);
    let body = json!({ "model": m.spec, "checks": blocks, "skipped": skipped, "pass": pass });
    ctx.emit("verify.json", &json_report(&header, body)?)?;
    for b in &blocks {
        eprintln!("{} {}", if b.pass { "PASS" } else { "FAIL" }, b.check);
    }
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_exit_codes() {
        assert_eq!(Outcome::Pass.exit_code(), 0);
        assert_eq!(Outcome::CheckFailed.exit_code(), 2);
    }

    #[test]
    fn model_errors_map_to_exit_codes() {
        let cfg = Config::parse("family = stable\nalpha = 2.5\nrhobar = 0.5\n").unwrap();
        assert_eq!(model(&cfg).unwrap_err().exit_code(), 1);
        let cfg = Config::parse("family = levy\n").unwrap();
        assert_eq!(model(&cfg).unwrap_err().exit_code(), 1);
        let e: CliError = reslevy::Error::Numerical {
            method: "m",
            diagnostics: String::new(),
        }
        .into();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn env_seed_must_be_an_integer() {
        let rc = RunConfig {
            command: Command::Classify,
            config: Config::parse("family = stable\nalpha = 1.5\nrhobar = 0.5\n").unwrap(),
        };
        assert_eq!(run(rc, Some("x")).unwrap_err().exit_code(), 1);
    }
}
